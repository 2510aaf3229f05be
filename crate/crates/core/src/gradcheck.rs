//! Central finite-difference verification of analytic gradients.

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::{Binding, ParamSet};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Half-width of the central difference.
    pub step: f64,
    /// Check at most this many coordinates per parameter (evenly spaced);
    /// `None` checks all of them.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-5, max_coords_per_param: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index where the maximum was attained.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Relative discrepancy between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients of a scalar function against central
/// differences, over every trainable coordinate of `params`.
///
/// `f` must build the loss deterministically from the bound parameters.
pub fn finite_diff_check<F>(params: &ParamSet, mut f: F, options: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &Binding) -> Result<Var>,
{
    let mut tape = Tape::new();
    let binding = params.bind(&mut tape, true)?;
    let loss = f(&mut tape, &binding)?;
    let grads = tape.backward(loss)?;
    let analytic = binding.collect(&grads);

    let mut eval = |ps: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let binding = ps.bind(&mut tape, false)?;
        let loss = f(&mut tape, &binding)?;
        tape.value(loss).item()
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, coords_checked: 0 };
    let mut probe = params.clone();
    for (i, param) in params.iter().enumerate() {
        let Some(grad) = &analytic[i] else { continue };
        let numel = param.value.numel();
        let stride = match options.max_coords_per_param {
            Some(cap) if cap > 0 && numel > cap => numel.div_ceil(cap),
            _ => 1,
        };
        for j in (0..numel).step_by(stride) {
            let original = param.value.data()[j];
            probe.get_mut(&param.name).expect("same layout").data_mut()[j] = original + options.step;
            let plus = eval(&probe)?;
            probe.get_mut(&param.name).expect("same layout").data_mut()[j] = original - options.step;
            let minus = eval(&probe)?;
            probe.get_mut(&param.name).expect("same layout").data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * options.step);
            let a = grad.data()[j];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::Numeric(format!(
                    "gradient check on `{}`[{j}]: analytic {a}, numeric {numeric}",
                    param.name
                )));
            }
            let err = relative_error(a, numeric);
            report.coords_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((param.name.clone(), j));
            }
        }
    }
    Ok(report)
}
