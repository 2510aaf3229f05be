use crate::autograd::{BackwardRule, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct MaxPool {
    /// Flat input index chosen by each output element.
    argmax: Vec<usize>,
}

impl BackwardRule for MaxPool {
    fn name(&self) -> &'static str {
        "maxpool2d"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let mut dx = Tensor::zeros_like(inputs[0]);
        for (&src, g) in self.argmax.iter().zip(grad.data()) {
            dx.data_mut()[src] += g;
        }
        Ok(vec![Some(dx)])
    }
}

/// Max over `window × window` patches taken every `stride` cells, no padding.
/// Ties resolve to the first element in row-major order.
pub fn maxpool2d(tape: &mut Tape, x: Var, window: usize, stride: usize) -> Result<Var> {
    let xt = tape.value(x);
    let &[b, c, h, w] = xt.shape() else {
        return Err(Error::dim(format!("maxpool2d expects NCHW, got {:?}", xt.shape())));
    };
    if window == 0 || stride == 0 || window > h || window > w {
        return Err(Error::dim(format!(
            "invalid pooling window {window} (stride {stride}) for {h}×{w} input"
        )));
    }
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let mut out = Vec::with_capacity(b * c * oh * ow);
    let mut argmax = Vec::with_capacity(b * c * oh * ow);
    for plane in 0..b * c {
        let base = plane * h * w;
        for y in 0..oh {
            for z in 0..ow {
                let mut best = base + y * stride * w + z * stride;
                for i in 0..window {
                    for j in 0..window {
                        let idx = base + (y * stride + i) * w + z * stride + j;
                        if xt.data()[idx] > xt.data()[best] {
                            best = idx;
                        }
                    }
                }
                out.push(xt.data()[best]);
                argmax.push(best);
            }
        }
    }
    let out = Tensor::new(&[b, c, oh, ow], out)?;
    tape.push(&[x], out, MaxPool { argmax })
}

/// Mean over the spatial axes: `[B, C, H, W] → [B, C]`.
pub fn global_avg_pool(tape: &mut Tape, x: Var) -> Result<Var> {
    if tape.value(x).rank() != 4 {
        return Err(Error::dim(format!("global_avg_pool expects NCHW, got {:?}", tape.shape(x))));
    }
    tape.mean(x, &[2, 3])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_maximum() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let y = maxpool2d(&mut tape, x, 2, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0]);
    }

    #[test]
    fn constant_input_gives_constant_output() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(&[2, 3, 6, 6], 1.25)).unwrap();
        let y = maxpool2d(&mut tape, x, 2, 2).unwrap();
        assert_eq!(tape.value(y), &Tensor::full(&[2, 3, 3, 3], 1.25));
    }

    #[test]
    fn ties_route_to_first_index() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::full(&[1, 1, 2, 2], 3.0)).unwrap();
        let y = maxpool2d(&mut tape, x, 2, 2).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn window_larger_than_input_fails() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 1, 2, 2])).unwrap();
        assert!(matches!(maxpool2d(&mut tape, x, 3, 1), Err(Error::Dimension(_))));
        assert!(matches!(maxpool2d(&mut tape, x, 0, 1), Err(Error::Dimension(_))));
    }
}
