//! Batch normalization over the channel axis (axis 1).
//!
//! Train mode normalizes with the batch statistics (biased variance) and
//! reports updated running statistics; the running variance is tracked with
//! the unbiased batch variance. Eval mode normalizes with the running
//! statistics and reports nothing.

use crate::autograd::{BackwardRule, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchNormMode {
    Train,
    Eval,
}

/// Inputs of one batchnorm application.
#[derive(Debug, Clone, Copy)]
pub struct BatchNormState<'a> {
    pub gamma: Var,
    pub beta: Var,
    pub running_mean: &'a Tensor,
    pub running_var: &'a Tensor,
    pub mode: BatchNormMode,
    pub eps: f64,
    pub momentum: f64,
}

/// Running statistics after one train-mode batch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

struct BatchNorm {
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    channels: usize,
    plane: usize,
    train: bool,
}

impl BatchNorm {
    fn channel_of(&self, i: usize) -> usize {
        (i / self.plane) % self.channels
    }
}

impl BackwardRule for BatchNorm {
    fn name(&self) -> &'static str {
        "batchnorm"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let gamma = inputs[1].data();
        let g = grad.data();
        let mut dgamma = vec![0.0; self.channels];
        let mut dbeta = vec![0.0; self.channels];
        for (i, (&gv, &xh)) in g.iter().zip(&self.x_hat).enumerate() {
            let c = self.channel_of(i);
            dgamma[c] += gv * xh;
            dbeta[c] += gv;
        }
        let mut dx = vec![0.0; g.len()];
        if self.train {
            let count = (g.len() / self.channels) as f64;
            for (i, d) in dx.iter_mut().enumerate() {
                let c = self.channel_of(i);
                let dxh = g[i] * gamma[c];
                // dbeta·γ = Σ dx̂ and dgamma·γ = Σ dx̂·x̂ over the channel
                *d = self.inv_std[c] / count
                    * (count * dxh - dbeta[c] * gamma[c] - self.x_hat[i] * dgamma[c] * gamma[c]);
            }
        } else {
            for (i, d) in dx.iter_mut().enumerate() {
                let c = self.channel_of(i);
                *d = g[i] * gamma[c] * self.inv_std[c];
            }
        }
        Ok(vec![
            Some(Tensor::new(inputs[0].shape(), dx)?),
            Some(Tensor::from_vec(dgamma)),
            Some(Tensor::from_vec(dbeta)),
        ])
    }
}

/// Normalizes `x: [B, C, ...]` per channel, then scales by γ and shifts by β.
pub fn batchnorm(tape: &mut Tape, x: Var, state: BatchNormState<'_>) -> Result<(Var, Option<RunningStats>)> {
    let xt = tape.value(x);
    let (batch, channels) = match xt.shape() {
        [b, c, ..] => (*b, *c),
        s => return Err(Error::dim(format!("batchnorm expects [B, C, ...], got {s:?}"))),
    };
    for (what, t) in [
        ("gamma", tape.value(state.gamma)),
        ("beta", tape.value(state.beta)),
        ("running mean", state.running_mean),
        ("running var", state.running_var),
    ] {
        if t.shape() != [channels] {
            return Err(Error::dim(format!("batchnorm {what} has shape {:?}, expected [{channels}]", t.shape())));
        }
    }
    let train = state.mode == BatchNormMode::Train;
    if train && batch < 2 {
        return Err(Error::contract(format!("batchnorm in train mode needs a batch of at least 2, got {batch}")));
    }
    let plane: usize = xt.shape()[2..].iter().product();
    let count = batch * plane;
    let channel_of = |i: usize| (i / plane.max(1)) % channels;

    let (mean, var) = if train {
        let mut mean = vec![0.0; channels];
        for (i, v) in xt.data().iter().enumerate() {
            mean[channel_of(i)] += v;
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; channels];
        for (i, v) in xt.data().iter().enumerate() {
            let c = channel_of(i);
            var[c] += (v - mean[c]).powi(2);
        }
        var.iter_mut().for_each(|s| *s /= count as f64);
        (mean, var)
    } else {
        (state.running_mean.data().to_vec(), state.running_var.data().to_vec())
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
    let x_hat: Vec<f64> = xt
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = channel_of(i);
            (v - mean[c]) * inv_std[c]
        })
        .collect();
    let (gamma, beta) = (tape.value(state.gamma).data(), tape.value(state.beta).data());
    let out: Vec<f64> = x_hat
        .iter()
        .enumerate()
        .map(|(i, xh)| {
            let c = channel_of(i);
            gamma[c] * xh + beta[c]
        })
        .collect();
    let out = Tensor::new(xt.shape(), out)?;

    let stats = train.then(|| {
        let m = state.momentum;
        let unbiased = count as f64 / (count as f64 - 1.0);
        RunningStats {
            mean: state.running_mean.zip_map(&Tensor::from_vec(mean.clone()), |r, b| (1.0 - m) * r + m * b).expect("same shape"),
            var: state
                .running_var
                .zip_map(&Tensor::from_vec(var.clone()), |r, b| (1.0 - m) * r + m * b * unbiased)
                .expect("same shape"),
        }
    });

    let rule = BatchNorm { x_hat, inv_std, channels, plane: plane.max(1), train };
    let y = tape.push(&[x, state.gamma, state.beta], out, rule)?;
    Ok((y, stats))
}
