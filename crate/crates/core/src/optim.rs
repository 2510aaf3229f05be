//! Parameter update rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::Tensor;

fn default_beta1() -> f64 {
    0.5
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OptimizerConfig {
    Sgd {
        learning_rate: f64,
    },
    /// Bias-corrected first/second moment method.
    AdaptiveMoment {
        learning_rate: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

impl OptimizerConfig {
    /// Settings used for adversarial training unless overridden.
    pub fn gan_default() -> Self {
        OptimizerConfig::AdaptiveMoment { learning_rate: 2e-4, beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }

    /// Settings used for the classifier baselines unless overridden.
    pub fn baseline_default() -> Self {
        OptimizerConfig::Sgd { learning_rate: 0.01 }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { learning_rate } | OptimizerConfig::AdaptiveMoment { learning_rate, .. } => {
                learning_rate
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::contract(format!("learning rate must be positive, got {lr}")));
        }
        if let OptimizerConfig::AdaptiveMoment { beta1, beta2, eps, .. } = *self {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::contract(format!(
                    "moment decay rates must lie in [0, 1) and eps be positive (β₁={beta1}, β₂={beta2}, eps={eps})"
                )));
            }
        }
        Ok(())
    }
}

/// Checks alignment and finiteness of a gradient list before any update.
fn check_grads(params: &ParamSet, grads: &[Option<Tensor>]) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::contract(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for (p, g) in params.iter().zip(grads) {
        let Some(g) = g else { continue };
        if g.shape() != p.value.shape() {
            return Err(Error::dim(format!(
                "gradient for `{}` has shape {:?}, parameter has {:?}",
                p.name,
                g.shape(),
                p.value.shape()
            )));
        }
        g.ensure_finite(&format!("gradient of `{}`", p.name))?;
    }
    Ok(())
}

/// `θ ← θ − η·g` for every trainable entry with a gradient. Entries without a
/// gradient and non-trainable buffers are left alone. Nothing is modified if
/// any gradient is non-finite.
pub fn sgd_step(params: &mut ParamSet, grads: &[Option<Tensor>], learning_rate: f64) -> Result<()> {
    if !(learning_rate > 0.0) {
        return Err(Error::contract(format!("learning rate must be positive, got {learning_rate}")));
    }
    check_grads(params, grads)?;
    for (i, g) in grads.iter().enumerate() {
        let Some(g) = g else { continue };
        if !params.entries()[i].trainable {
            continue;
        }
        for (t, gv) in params.value_at_mut(i).data_mut().iter_mut().zip(g.data()) {
            *t -= learning_rate * gv;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    first: Tensor,
    second: Tensor,
}

/// Optimizer configuration plus its per-parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    config: OptimizerConfig,
    steps: u64,
    moments: Vec<Option<Moments>>,
}

impl OptimizerState {
    /// Zero moments for every trainable entry of `params`.
    pub fn new(config: OptimizerConfig, params: &ParamSet) -> Result<Self> {
        config.validate()?;
        let moments = params
            .iter()
            .map(|p| {
                (p.trainable && matches!(config, OptimizerConfig::AdaptiveMoment { .. })).then(|| Moments {
                    first: Tensor::zeros_like(&p.value),
                    second: Tensor::zeros_like(&p.value),
                })
            })
            .collect();
        Ok(OptimizerState { config, steps: 0, moments })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Option<Tensor>]) -> Result<()> {
        match self.config {
            OptimizerConfig::Sgd { learning_rate } => sgd_step(params, grads, learning_rate)?,
            OptimizerConfig::AdaptiveMoment { .. } => self.adaptive_step(params, grads)?,
        }
        self.steps += 1;
        Ok(())
    }

    fn adaptive_step(&mut self, params: &mut ParamSet, grads: &[Option<Tensor>]) -> Result<()> {
        let OptimizerConfig::AdaptiveMoment { learning_rate, beta1, beta2, eps } = self.config else {
            unreachable!("called only for the adaptive variant")
        };
        if self.moments.len() != params.len() {
            return Err(Error::contract(format!(
                "optimizer was built for {} parameters, got {}",
                self.moments.len(),
                params.len()
            )));
        }
        check_grads(params, grads)?;
        let t = (self.steps + 1) as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let (Some(g), Some(m)) = (g, self.moments[i].as_mut()) else { continue };
            let theta = params.value_at_mut(i).data_mut();
            let (first, second) = (m.first.data_mut(), m.second.data_mut());
            for j in 0..theta.len() {
                let gv = g.data()[j];
                first[j] = beta1 * first[j] + (1.0 - beta1) * gv;
                second[j] = beta2 * second[j] + (1.0 - beta2) * gv * gv;
                theta[j] -= learning_rate * (first[j] / c1) / ((second[j] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}
