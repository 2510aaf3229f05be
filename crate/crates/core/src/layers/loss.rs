//! Scalar training losses, each averaged over the batch.

use crate::autograd::{BackwardRule, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied to every argument of `ln` in the probability losses.
pub const PROB_CLAMP: f64 = 1e-7;

struct Bce {
    targets: Vec<f64>,
}

impl BackwardRule for Bce {
    fn name(&self) -> &'static str {
        "bce"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let p = inputs[0];
        let scale = grad.item()? / p.numel() as f64;
        let data = p
            .data()
            .iter()
            .zip(&self.targets)
            .map(|(&pv, &t)| {
                let pos = if pv >= PROB_CLAMP { t / pv } else { 0.0 };
                let neg = if 1.0 - pv >= PROB_CLAMP { (1.0 - t) / (1.0 - pv) } else { 0.0 };
                -scale * (pos - neg)
            })
            .collect();
        Ok(vec![Some(Tensor::new(p.shape(), data)?)])
    }
}

/// Binary cross-entropy of probabilities against 0/1 targets:
/// `−mean[t·ln p + (1−t)·ln(1−p)]`, with each log argument floored at
/// [`PROB_CLAMP`] so the loss stays finite at p ∈ {0, 1}.
pub fn bce_from_probability(tape: &mut Tape, p: Var, targets: &[f64]) -> Result<Var> {
    let pt = tape.value(p);
    if pt.numel() != targets.len() {
        return Err(Error::dim(format!(
            "bce over {} probabilities with {} targets",
            pt.numel(),
            targets.len()
        )));
    }
    if pt.numel() == 0 {
        return Err(Error::Domain("bce over an empty batch".into()));
    }
    let total: f64 = pt
        .data()
        .iter()
        .zip(targets)
        .map(|(&pv, &t)| t * pv.max(PROB_CLAMP).ln() + (1.0 - t) * (1.0 - pv).max(PROB_CLAMP).ln())
        .sum();
    let out = Tensor::scalar(-total / targets.len() as f64);
    tape.push(&[p], out, Bce { targets: targets.to_vec() })
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::dim(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if batch == 0 {
        return Err(Error::Domain("loss over an empty batch".into()));
    }
    match labels.iter().find(|&&l| l >= classes) {
        Some(l) => Err(Error::contract(format!("label {l} outside 0..{classes}"))),
        None => Ok(()),
    }
}

fn matrix_dims(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [b, k] => Ok((b, k)),
        ref s => Err(Error::dim(format!("{what} expects [B, K] scores, got {s:?}"))),
    }
}

struct SoftmaxCe {
    probs: Vec<f64>,
    labels: Vec<usize>,
}

impl BackwardRule for SoftmaxCe {
    fn name(&self) -> &'static str {
        "softmax_cross_entropy"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (batch, classes) = matrix_dims(inputs[0], "softmax_cross_entropy")?;
        let scale = grad.item()? / batch as f64;
        let mut d = self.probs.clone();
        for (row, &label) in self.labels.iter().enumerate() {
            d[row * classes + label] -= 1.0;
        }
        d.iter_mut().for_each(|v| *v *= scale);
        Ok(vec![Some(Tensor::new(inputs[0].shape(), d)?)])
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let (_, classes) = matrix_dims(logits, "softmax")?;
    let mut out = logits.data().to_vec();
    for row in out.chunks_mut(classes.max(1)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Tensor::new(logits.shape(), out)
}

/// Mean of `−ln softmax(logits)[label]` over the batch.
pub fn softmax_cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let lt = tape.value(logits);
    let (batch, classes) = matrix_dims(lt, "softmax_cross_entropy")?;
    check_labels(labels, batch, classes)?;
    let mut total = 0.0;
    for (row, &label) in lt.data().chunks(classes).zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += log_sum + max - row[label];
    }
    let probs = softmax_rows(lt)?.into_data();
    let out = Tensor::scalar(total / batch as f64);
    tape.push(&[logits], out, SoftmaxCe { probs, labels: labels.to_vec() })
}

struct Hinge {
    labels: Vec<usize>,
    margin: f64,
}

impl BackwardRule for Hinge {
    fn name(&self) -> &'static str {
        "hinge"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let s = inputs[0];
        let (batch, classes) = matrix_dims(s, "hinge_loss")?;
        let scale = grad.item()? / batch as f64;
        let mut d = vec![0.0; s.numel()];
        for (row, &y) in self.labels.iter().enumerate() {
            let r = &s.data()[row * classes..(row + 1) * classes];
            for j in (0..classes).filter(|&j| j != y) {
                if self.margin + r[j] - r[y] > 0.0 {
                    d[row * classes + j] += scale;
                    d[row * classes + y] -= scale;
                }
            }
        }
        Ok(vec![Some(Tensor::new(s.shape(), d)?)])
    }
}

/// Multi-class hinge: mean over the batch of `Σ_{j≠y} max(0, margin + s_j − s_y)`.
pub fn hinge_loss(tape: &mut Tape, scores: Var, labels: &[usize], margin: f64) -> Result<Var> {
    let st = tape.value(scores);
    let (batch, classes) = matrix_dims(st, "hinge_loss")?;
    check_labels(labels, batch, classes)?;
    let mut total = 0.0;
    for (row, &y) in st.data().chunks(classes).zip(labels) {
        total += (0..classes)
            .filter(|&j| j != y)
            .map(|j| (margin + row[j] - row[y]).max(0.0))
            .sum::<f64>();
    }
    let out = Tensor::scalar(total / batch as f64);
    tape.push(&[scores], out, Hinge { labels: labels.to_vec(), margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bce(p: &[f64], t: &[f64]) -> f64 {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::from_vec(p.to_vec())).unwrap();
        let l = bce_from_probability(&mut tape, v, t).unwrap();
        tape.value(l).item().unwrap()
    }

    #[test]
    fn bce_reference_points() {
        assert_eq!(bce(&[1.0], &[1.0]), 0.0);
        assert!((bce(&[0.5], &[1.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(&[0.5], &[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        // −ln(1e-7) = 16.11809565095832
        assert!((bce(&[0.0], &[1.0]) - 16.118095650958320).abs() < 1e-12);
    }

    fn ce(logits: Tensor, labels: &[usize]) -> f64 {
        let mut tape = Tape::new();
        let v = tape.constant(logits).unwrap();
        let l = softmax_cross_entropy(&mut tape, v, labels).unwrap();
        tape.value(l).item().unwrap()
    }

    #[test]
    fn cross_entropy_reference_points() {
        let uniform = ce(Tensor::zeros(&[3, 10]), &[0, 4, 9]);
        assert!((uniform - 10f64.ln()).abs() < 1e-14);
        let mut one_hot = Tensor::zeros(&[1, 4]);
        one_hot.data_mut()[2] = 1000.0;
        assert!(ce(one_hot, &[2]) < 1e-300);
    }

    #[test]
    fn label_out_of_range_is_contract_error() {
        let mut tape = Tape::new();
        let v = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(softmax_cross_entropy(&mut tape, v, &[0, 3]), Err(Error::Contract(_))));
        assert!(matches!(hinge_loss(&mut tape, v, &[5, 0], 1.0), Err(Error::Contract(_))));
    }

    fn hinge(scores: Tensor, labels: &[usize]) -> f64 {
        let mut tape = Tape::new();
        let v = tape.constant(scores).unwrap();
        let l = hinge_loss(&mut tape, v, labels, 1.0).unwrap();
        tape.value(l).item().unwrap()
    }

    #[test]
    fn hinge_reference_points() {
        let separated = Tensor::new(&[2, 3], vec![3.0, 1.0, 2.0, 0.0, 5.0, 3.9]).unwrap();
        assert_eq!(hinge(separated, &[0, 1]), 0.0);
        assert_eq!(hinge(Tensor::full(&[4, 5], 0.3), &[0, 1, 2, 4]), 4.0);
    }
}
