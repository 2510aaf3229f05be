//! Pointwise nonlinearities.
//!
//! `tanh` and `sigmoid` clamp their results one ulp inside the open interval,
//! so outputs stay strictly within (−1, 1) and (0, 1) even where the exact
//! value rounds to the endpoint in `f64`.

use crate::autograd::{BackwardRule, Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Largest `f64` below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy)]
enum Kind {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

struct Pointwise(Kind);

impl BackwardRule for Pointwise {
    fn name(&self) -> &'static str {
        match self.0 {
            Kind::Relu => "relu",
            Kind::LeakyRelu(_) => "leaky_relu",
            Kind::Tanh => "tanh",
            Kind::Sigmoid => "sigmoid",
        }
    }

    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let dx = match self.0 {
            Kind::Relu => grad.zip_map(inputs[0], |g, x| if x > 0.0 { g } else { 0.0 })?,
            Kind::LeakyRelu(alpha) => grad.zip_map(inputs[0], |g, x| if x > 0.0 { g } else { alpha * g })?,
            Kind::Tanh => grad.zip_map(output, |g, y| g * (1.0 - y * y))?,
            Kind::Sigmoid => grad.zip_map(output, |g, y| g * y * (1.0 - y))?,
        };
        Ok(vec![Some(dx)])
    }
}

fn sigmoid_scalar(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, BELOW_ONE)
}

fn apply(tape: &mut Tape, x: Var, kind: Kind) -> Result<Var> {
    let f: Box<dyn Fn(f64) -> f64> = match kind {
        Kind::Relu => Box::new(|v: f64| v.max(0.0)),
        Kind::LeakyRelu(alpha) => Box::new(move |v: f64| if v > 0.0 { v } else { alpha * v }),
        Kind::Tanh => Box::new(|v: f64| v.tanh().clamp(-BELOW_ONE, BELOW_ONE)),
        Kind::Sigmoid => Box::new(sigmoid_scalar),
    };
    let out = tape.value(x).map(f);
    tape.push(&[x], out, Pointwise(kind))
}

pub fn relu(tape: &mut Tape, x: Var) -> Result<Var> {
    apply(tape, x, Kind::Relu)
}

/// `x` for positive inputs, `alpha · x` otherwise.
pub fn leaky_relu(tape: &mut Tape, x: Var, alpha: f64) -> Result<Var> {
    apply(tape, x, Kind::LeakyRelu(alpha))
}

pub fn tanh(tape: &mut Tape, x: Var) -> Result<Var> {
    apply(tape, x, Kind::Tanh)
}

pub fn sigmoid(tape: &mut Tape, x: Var) -> Result<Var> {
    apply(tape, x, Kind::Sigmoid)
}
