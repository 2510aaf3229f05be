//! Confusion counts, macro-averaged classification metrics, ROC and AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::softmax_rows;
use crate::tensor::Tensor;

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
    pub total: usize,
    pub correct: usize,
}

impl ConfusionCounts {
    pub fn classes(&self) -> usize {
        self.per_class.len()
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionCounts> {
    if predictions.len() != labels.len() {
        return Err(Error::dim(format!("{} predictions for {} labels", predictions.len(), labels.len())));
    }
    if let Some(v) = predictions.iter().chain(labels).find(|&&v| v >= classes) {
        return Err(Error::contract(format!("class {v} outside 0..{classes}")));
    }
    let n = labels.len();
    let mut per_class = vec![ClassCounts::default(); classes];
    let mut correct = 0;
    for (&p, &l) in predictions.iter().zip(labels) {
        if p == l {
            per_class[p].tp += 1;
            correct += 1;
        } else {
            per_class[p].fp += 1;
            per_class[l].fn_ += 1;
        }
    }
    for c in &mut per_class {
        c.tn = n - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts { per_class, total: n, correct })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro-averaged metrics plus the per-class values they come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Notes about empty denominators that were scored as 0.
    pub warnings: Vec<String>,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn ratio(num: usize, den: usize, what: &str, class: usize, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("class {class}: {what} has an empty denominator, scored as 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision and recall are unweighted means over classes; the macro F1 is
/// the harmonic mean of the macro precision and recall.
pub fn metrics(counts: &ConfusionCounts) -> Result<Metrics> {
    if counts.total == 0 {
        return Err(Error::contract("metrics of an empty evaluation set"));
    }
    if counts.per_class.is_empty() {
        return Err(Error::contract("metrics over zero classes"));
    }
    let mut warnings = Vec::new();
    let per_class: Vec<ClassMetrics> = counts
        .per_class
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let precision = ratio(c.tp, c.tp + c.fp, "precision", k, &mut warnings);
            let recall = ratio(c.tp, c.tp + c.fn_, "recall", k, &mut warnings);
            ClassMetrics { precision, recall, f1: f1_score(precision, recall) }
        })
        .collect();
    let k = per_class.len() as f64;
    let precision = per_class.iter().map(|m| m.precision).sum::<f64>() / k;
    let recall = per_class.iter().map(|m| m.recall).sum::<f64>() / k;
    Ok(Metrics {
        precision,
        recall,
        accuracy: counts.correct as f64 / counts.total as f64,
        f1: f1_score(precision, recall),
        per_class,
        warnings,
    })
}

/// A point on an ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve of binary `labels` (0/1) ranked by `scores`, highest first.
///
/// Starts at (0, 0) and gains one point per distinct score, the last of which
/// is (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::dim(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::contract(format!("binary label {l} is neither 0 nor 1")));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score {s}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::contract("roc curve needs both positive and negative samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(rank + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_tie {
            points.push(RocPoint { fpr: fp as f64 / negatives as f64, tpr: tp as f64 / positives as f64 });
        }
    }
    Ok(points)
}

/// Trapezoidal area under an ROC point list.
pub fn auc(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Softmax probability of `class` per row of `logits: [B, K]`, and whether
/// each sample's true label is that class.
pub fn one_vs_rest_scores(logits: &Tensor, labels: &[usize], class: usize) -> Result<(Vec<f64>, Vec<u8>)> {
    let &[b, k] = logits.shape() else {
        return Err(Error::dim(format!("expected [B, K] logits, got {:?}", logits.shape())));
    };
    if class >= k {
        return Err(Error::contract(format!("class {class} outside 0..{k}")));
    }
    if labels.len() != b {
        return Err(Error::dim(format!("{} labels for {b} rows", labels.len())));
    }
    let probs = softmax_rows(logits)?;
    let scores = probs.data().chunks_exact(k).map(|row| row[class]).collect();
    Ok((scores, labels.iter().map(|&l| u8::from(l == class)).collect()))
}

/// Mean one-vs-rest AUC over the classes present in `labels` (classes with no
/// positives or no negatives are skipped).
pub fn macro_auc(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let k = logits.shape().get(1).copied().unwrap_or(0);
    let mut total = 0.0;
    let mut counted = 0;
    for class in 0..k {
        let (scores, binary) = one_vs_rest_scores(logits, labels, class)?;
        let pos = binary.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == binary.len() {
            continue;
        }
        total += auc(&roc_curve(&scores, &binary)?);
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::contract("no class has both positive and negative samples"));
    }
    Ok(total / counted as f64)
}

/// Row-wise argmax, first index on ties.
pub fn argmax_rows(scores: &Tensor) -> Result<Vec<usize>> {
    let &[_, k] = scores.shape() else {
        return Err(Error::dim(format!("expected [B, K] scores, got {:?}", scores.shape())));
    };
    Ok(scores
        .data()
        .chunks_exact(k.max(1))
        .map(|row| row.iter().enumerate().fold(0, |best, (i, &v)| if v > row[best] { i } else { best }))
        .collect())
}

/// Rounds half to even at `decimals` places.
pub fn round_half_even(value: f64, decimals: i32) -> f64 {
    let factor = 10f64.powi(decimals);
    (value * factor).round_ties_even() / factor
}

/// Everything reported about one trained model on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub split: String,
    pub samples: usize,
    /// Always `"macro"`: unweighted mean over classes.
    pub averaging: String,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionCounts,
    /// Class whose one-vs-rest curve is stored in `roc`.
    pub roc_class: usize,
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub macro_auc: f64,
    pub warnings: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Scores a classifier's logits against labels.
    pub fn from_logits(
        model: &str,
        dataset: &str,
        split: &str,
        logits: &Tensor,
        labels: &[usize],
        roc_class: usize,
        seed: u64,
        config: serde_json::Value,
    ) -> Result<Self> {
        let k = logits.shape().get(1).copied().unwrap_or(0);
        let predictions = argmax_rows(logits)?;
        let counts = confusion(&predictions, labels, k)?;
        let m = metrics(&counts)?;
        let (scores, binary) = one_vs_rest_scores(logits, labels, roc_class)?;
        let roc = roc_curve(&scores, &binary)?;
        Ok(EvalReport {
            model: model.to_string(),
            dataset: dataset.to_string(),
            split: split.to_string(),
            samples: labels.len(),
            averaging: "macro".into(),
            precision: m.precision,
            recall: m.recall,
            accuracy: m.accuracy,
            f1: m.f1,
            per_class: m.per_class,
            confusion: counts,
            roc_class,
            auc: auc(&roc),
            roc,
            macro_auc: macro_auc(logits, labels)?,
            warnings: m.warnings,
            seed,
            config,
        })
    }
}
