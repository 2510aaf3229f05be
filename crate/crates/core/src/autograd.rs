//! Reverse-mode automatic differentiation over an append-only tape.
//!
//! A [`Tape`] records every primitive operation of one forward pass. Each
//! recorded node keeps its output value, the ids of its inputs, and a
//! [`BackwardRule`] mapping the output gradient to input gradients. Node ids
//! are assigned in creation order, so inputs always precede outputs and a
//! single reverse sweep visits each node once.
//!
//! Every operation checks its output for NaN/Inf and fails with
//! [`Error::Numeric`] instead of propagating.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Local derivative of one primitive.
///
/// `inputs` are the values the op consumed, `output` the value it produced,
/// `grad` the gradient of the loss with respect to `output`. Returns one
/// entry per input; `None` means "no contribution".
pub trait BackwardRule: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>>;
}

struct Node {
    inputs: Vec<Var>,
    value: Tensor,
    rule: Option<Box<dyn BackwardRule>>,
    requires_grad: bool,
}

/// Recorded computation graph for a single forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every leaf that requires them.
///
/// Leaves that the loss does not depend on are present with zero gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    by_leaf: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.by_leaf.get(&var)
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.by_leaf.iter().map(|(v, t)| (*v, t))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Leaves with `requires_grad` receive gradients.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf")?;
        let id = self.nodes.len();
        self.nodes.push(Node { inputs: Vec::new(), value, rule: None, requires_grad });
        Ok(Var(id))
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    /// Records the result of a primitive. Used by the layer modules to add
    /// their own differentiable operations.
    pub fn push(&mut self, inputs: &[Var], value: Tensor, rule: impl BackwardRule + 'static) -> Result<Var> {
        value.ensure_finite(rule.name())?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let id = self.nodes.len();
        self.nodes.push(Node {
            inputs: inputs.to_vec(),
            value,
            rule: requires_grad.then(|| Box::new(rule) as Box<dyn BackwardRule>),
            requires_grad,
        });
        Ok(Var(id))
    }

    /// A constant copy of `var`'s value; gradients stop here.
    pub fn detach(&mut self, var: Var) -> Result<Var> {
        let value = self.value(var).clone();
        self.constant(value)
    }

    /// Back-propagates from a scalar `loss`.
    ///
    /// The tape is left untouched, so calling this twice yields identical results.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = &self.nodes[loss.0];
        if !root.value.shape().is_empty() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            let Some(rule) = node.rule.as_ref() else { continue };
            let Some(grad) = grads[id].take() else { continue };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let input_grads = rule.backward(&inputs, &node.value, &grad)?;
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}", rule.name());
            for (input, g) in node.inputs.iter().zip(input_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                g.ensure_finite(rule.name())?;
                match &mut grads[input.0] {
                    Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        let mut by_leaf = BTreeMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if node.requires_grad && node.rule.is_none() {
                let g = grads
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros_like(&node.value));
                by_leaf.insert(Var(id), g);
            }
        }
        Ok(Gradients { by_leaf })
    }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic with trailing-dimension broadcasting

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryKind {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryKind::Add => a + b,
            BinaryKind::Sub => a - b,
            BinaryKind::Mul => a * b,
            BinaryKind::Div => a / b,
        }
    }
}

struct Binary(BinaryKind);

/// Output shape when one shape is a suffix of the other.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a.ends_with(b) {
        Ok(a.to_vec())
    } else if b.ends_with(a) {
        Ok(b.to_vec())
    } else {
        Err(Error::dim(format!("cannot broadcast {a:?} with {b:?}")))
    }
}

/// Sums `grad` down to `len` elements by folding over the repeated prefix.
fn unbroadcast(grad: &[f64], shape: &[usize]) -> Tensor {
    let len: usize = shape.iter().product();
    let mut out = vec![0.0; len];
    if len > 0 {
        for (i, g) in grad.iter().enumerate() {
            out[i % len] += g;
        }
    }
    Tensor::new(shape, out).expect("shape product equals buffer length")
}

impl BackwardRule for Binary {
    fn name(&self) -> &'static str {
        match self.0 {
            BinaryKind::Add => "add",
            BinaryKind::Sub => "sub",
            BinaryKind::Mul => "mul",
            BinaryKind::Div => "div",
        }
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let (na, nb) = (a.numel().max(1), b.numel().max(1));
        let g = grad.data();
        let (ga, gb): (Vec<f64>, Vec<f64>) = match self.0 {
            BinaryKind::Add => (g.to_vec(), g.to_vec()),
            BinaryKind::Sub => (g.to_vec(), g.iter().map(|v| -v).collect()),
            BinaryKind::Mul => g
                .iter()
                .enumerate()
                .map(|(i, gv)| (gv * b.data()[i % nb], gv * a.data()[i % na]))
                .unzip(),
            BinaryKind::Div => g
                .iter()
                .enumerate()
                .map(|(i, gv)| {
                    let (av, bv) = (a.data()[i % na], b.data()[i % nb]);
                    (gv / bv, -gv * av / (bv * bv))
                })
                .unzip(),
        };
        Ok(vec![Some(unbroadcast(&ga, a.shape())), Some(unbroadcast(&gb, b.shape()))])
    }
}

impl Tape {
    fn binary(&mut self, kind: BinaryKind, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(ta.shape(), tb.shape())?;
        let numel: usize = shape.iter().product();
        let (na, nb) = (ta.numel().max(1), tb.numel().max(1));
        let data = (0..numel).map(|i| kind.apply(ta.data()[i % na], tb.data()[i % nb])).collect();
        let out = Tensor::new(&shape, data)?;
        self.push(&[a, b], out, Binary(kind))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, a, b)
    }
}

// ---------------------------------------------------------------------------
// Scalar affine maps and pointwise functions

struct Scale(f64);

impl BackwardRule for Scale {
    fn name(&self) -> &'static str {
        "scale"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(grad.scale(self.0))])
    }
}

struct Shift;

impl BackwardRule for Shift {
    fn name(&self) -> &'static str {
        "add_scalar"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(grad.clone())])
    }
}

struct Exp;

impl BackwardRule for Exp {
    fn name(&self) -> &'static str {
        "exp"
    }

    fn backward(&self, _inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(grad.zip_map(output, |g, y| g * y)?)])
    }
}

struct Log;

impl BackwardRule for Log {
    fn name(&self) -> &'static str {
        "log"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(grad.zip_map(inputs[0], |g, x| g / x)?)])
    }
}

impl Tape {
    /// `factor · a`
    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let out = self.value(a).scale(factor);
        self.push(&[a], out, Scale(factor))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    /// `a + offset`
    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v + offset);
        self.push(&[a], out, Shift)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push(&[a], out, Exp)
    }

    /// Natural log; non-positive entries fail as a numeric error.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::ln);
        self.push(&[a], out, Log)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }
}

// ---------------------------------------------------------------------------
// Matrix product

struct MatMul {
    m: usize,
    k: usize,
    n: usize,
}

impl BackwardRule for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (a, b) = (inputs[0], inputs[1]);
        let MatMul { m, k, n } = *self;
        let mut ga = vec![0.0; m * k];
        linalg::matmul_nt(grad.data(), b.data(), &mut ga, m, n, k, false);
        let mut gb = vec![0.0; k * n];
        linalg::matmul_tn(a.data(), grad.data(), &mut gb, k, m, n, false);
        Ok(vec![Some(Tensor::new(&[m, k], ga)?), Some(Tensor::new(&[k, n], gb)?)])
    }
}

impl Tape {
    /// `[m×k] · [k×n] → [m×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (&[m, k], &[k2, n]) = (ta.shape(), tb.shape()) else {
            return Err(Error::dim(format!(
                "matmul needs two matrices, got {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        };
        if k != k2 {
            return Err(Error::dim(format!("matmul inner dimensions {k} and {k2} differ")));
        }
        let mut out = vec![0.0; m * n];
        linalg::matmul_nn(ta.data(), tb.data(), &mut out, m, k, n, false);
        let out = Tensor::new(&[m, n], out)?;
        self.push(&[a, b], out, MatMul { m, k, n })
    }
}

// ---------------------------------------------------------------------------
// Reductions and reshapes

/// For each input element, the flat index of the output element it reduces into.
fn reduction_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let out_shape: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(i, _)| !axes.contains(i))
        .map(|(_, &d)| d)
        .collect();
    let numel: usize = shape.iter().product();
    let mut map = vec![0usize; numel];
    let mut index = vec![0usize; shape.len()];
    for slot in map.iter_mut() {
        let mut flat = 0;
        for (axis, &i) in index.iter().enumerate() {
            if !axes.contains(&axis) {
                flat = flat * shape[axis] + i;
            }
        }
        *slot = flat;
        for axis in (0..shape.len()).rev() {
            index[axis] += 1;
            if index[axis] < shape[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
    (out_shape, map)
}

struct Reduce {
    map: Vec<usize>,
    factor: f64,
}

impl BackwardRule for Reduce {
    fn name(&self) -> &'static str {
        "reduce"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let g = grad.data();
        let data = self.map.iter().map(|&o| g[o] * self.factor).collect();
        Ok(vec![Some(Tensor::new(inputs[0].shape(), data)?)])
    }
}

struct Reshape;

impl BackwardRule for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(grad.reshape(inputs[0].shape())?)])
    }
}

impl Tape {
    fn reduce(&mut self, a: Var, axes: &[usize], mean: bool) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != axes.len() || sorted.iter().any(|&ax| ax >= shape.len()) {
            return Err(Error::dim(format!("invalid reduction axes {axes:?} for shape {shape:?}")));
        }
        let count: usize = sorted.iter().map(|&ax| shape[ax]).product();
        if count == 0 {
            return Err(Error::Domain(format!("empty reduction over axes {axes:?} of {shape:?}")));
        }
        let (out_shape, map) = reduction_map(&shape, &sorted);
        let out_len: usize = out_shape.iter().product();
        let mut out = vec![0.0; out_len];
        for (&o, v) in map.iter().zip(self.value(a).data()) {
            out[o] += v;
        }
        let factor = if mean { 1.0 / count as f64 } else { 1.0 };
        if mean {
            out.iter_mut().for_each(|v| *v *= factor);
        }
        let out = Tensor::new(&out_shape, out)?;
        self.push(&[a], out, Reduce { map, factor })
    }

    /// Sum over `axes`; the reduced axes are dropped from the shape.
    pub fn sum(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        self.reduce(a, axes, false)
    }

    /// Mean over `axes`; the reduced axes are dropped from the shape.
    pub fn mean(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        self.reduce(a, axes, true)
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let axes: Vec<usize> = (0..self.value(a).rank()).collect();
        self.reduce(a, &axes, false)
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let axes: Vec<usize> = (0..self.value(a).rank()).collect();
        self.reduce(a, &axes, true)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).reshape(shape)?;
        self.push(&[a], out, Reshape)
    }

    /// Collapses everything after the leading (batch) axis.
    pub fn flatten(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape();
        let batch = *shape.first().ok_or_else(|| Error::dim("flatten on a scalar"))?;
        let rest: usize = shape[1..].iter().product();
        self.reshape(a, &[batch, rest])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_leaf(tape: &mut Tape, v: &[f64], rg: bool) -> Var {
        tape.leaf(Tensor::from_vec(v.to_vec()), rg).unwrap()
    }

    #[test]
    fn add_elementwise() {
        let mut tape = Tape::new();
        let a = vec_leaf(&mut tape, &[1.0, 2.0], false);
        let b = vec_leaf(&mut tape, &[3.0, 4.0], false);
        let c = tape.add(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn mul_by_ones_is_identity() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[2, 2], vec![1.5, -2.0, 0.25, 7.0]).unwrap()).unwrap();
        let ones = tape.constant(Tensor::ones(&[2, 2])).unwrap();
        let y = tape.mul(x, ones).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn div_by_zero_is_numeric_failure() {
        let mut tape = Tape::new();
        let a = vec_leaf(&mut tape, &[1.0, 2.0], false);
        let b = vec_leaf(&mut tape, &[1.0, 0.0], false);
        assert!(matches!(tape.div(a, b), Err(Error::Numeric(_))));
    }

    #[test]
    fn mismatched_shapes_are_dimension_errors() {
        let mut tape = Tape::new();
        let a = vec_leaf(&mut tape, &[1.0, 2.0, 3.0], false);
        let b = vec_leaf(&mut tape, &[1.0, 2.0], false);
        assert!(matches!(tape.add(a, b), Err(Error::Dimension(_))));
    }

    #[test]
    fn trailing_broadcast() {
        let mut tape = Tape::new();
        let a = tape.param(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap()).unwrap();
        let b = tape.param(Tensor::from_vec(vec![10.0, 20.0, 30.0])).unwrap();
        let c = tape.add(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
        let loss = tape.sum_all(c).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(b).unwrap().data(), &[2.0, 2.0, 2.0]);
        let s = tape.constant(Tensor::scalar(2.0)).unwrap();
        let d = tape.mul(s, a).unwrap();
        assert_eq!(tape.value(d).data()[5], 12.0);
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut tape = Tape::new();
        let a = Tensor::new(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let i = tape.constant(Tensor::eye(3)).unwrap();
        let z = tape.constant(Tensor::zeros(&[3, 3])).unwrap();
        let av = tape.constant(a.clone()).unwrap();
        let ia = tape.matmul(i, av).unwrap();
        assert_eq!(tape.value(ia), &a);
        let za = tape.matmul(z, av).unwrap();
        assert_eq!(tape.value(za), &Tensor::zeros(&[3, 2]));
        let bad = tape.constant(Tensor::zeros(&[3, 3])).unwrap();
        assert!(matches!(tape.matmul(av, bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn reductions() {
        let mut tape = Tape::new();
        let a = vec_leaf(&mut tape, &[1.0, 2.0, 3.0], false);
        let m = tape.mean_all(a).unwrap();
        assert_eq!(tape.value(m).item().unwrap(), 2.0);
        let z = tape.constant(Tensor::zeros(&[4])).unwrap();
        let s = tape.sum_all(z).unwrap();
        assert_eq!(tape.value(s).item().unwrap(), 0.0);
        let empty = tape.constant(Tensor::zeros(&[0])).unwrap();
        assert!(matches!(tape.mean_all(empty), Err(Error::Domain(_))));
        assert!(matches!(tape.sum(a, &[1]), Err(Error::Dimension(_))));
    }

    #[test]
    fn axis_reduction_drops_axis() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap()).unwrap();
        let rows = tape.sum(a, &[1]).unwrap();
        assert_eq!(tape.value(rows).shape(), &[2]);
        assert_eq!(tape.value(rows).data(), &[6.0, 15.0]);
        let cols = tape.mean(a, &[0]).unwrap();
        assert_eq!(tape.value(cols).data(), &[2.5, 3.5, 4.5]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0, -2.0], true);
        let sq = tape.square(x).unwrap();
        let loss = tape.sum_all(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0, 2.0], true);
        let p = vec_leaf(&mut tape, &[5.0, 6.0, 7.0], true);
        let loss = tape.sum_all(x).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p).unwrap(), &Tensor::zeros(&[3]));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[1.0, 2.0], true);
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_twice_is_identical() {
        let mut tape = Tape::new();
        let x = vec_leaf(&mut tape, &[0.3, -1.2, 2.0], true);
        let e = tape.exp(x).unwrap();
        let y = tape.mul(e, x).unwrap();
        let loss = tape.mean_all(y).unwrap();
        let first = tape.backward(loss).unwrap();
        let second = tape.backward(loss).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = vec_leaf(&mut tape, &[1.0], false);
        let x = vec_leaf(&mut tape, &[2.0], true);
        let y = tape.mul(c, x).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.len(), 1);
    }
}
