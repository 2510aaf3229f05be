//! Strided 2-D cross-correlation, its transpose, and spatial pad/crop.
//!
//! Tensors are NCHW. Kernels are `[F, C, Kh, Kw]` for both directions: a
//! convolution maps C channels to F, the transposed convolution with the same
//! kernel maps F back to C and is its exact adjoint.

use crate::autograd::{BackwardRule, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{self, Window};
use crate::tensor::Tensor;

fn nchw(t: &Tensor, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [b, c, h, w] => Ok([b, c, h, w]),
        ref s => Err(Error::dim(format!("{what} expects a 4-D NCHW tensor, got {s:?}"))),
    }
}

fn kernel_dims(t: &Tensor) -> Result<[usize; 4]> {
    match *t.shape() {
        [f, c, kh, kw] if kh >= 1 && kw >= 1 => Ok([f, c, kh, kw]),
        ref s => Err(Error::dim(format!("kernel must be [F, C, Kh, Kw] with Kh, Kw ≥ 1, got {s:?}"))),
    }
}

/// Output extent of a convolution along one axis.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::dim("stride must be at least 1"));
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::dim(format!(
            "kernel {kernel} larger than padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Output extent of a transposed convolution along one axis.
pub fn conv_transpose_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(Error::dim("stride must be at least 1"));
    }
    let grown = (input.saturating_sub(1) * stride + kernel) as isize - 2 * pad as isize;
    if input == 0 || grown < 1 {
        return Err(Error::dim(format!(
            "transposed convolution of extent {input} (kernel {kernel}, stride {stride}, pad {pad}) has output size {grown}"
        )));
    }
    Ok(grown as usize)
}

struct Conv2d {
    win: Window,
    batch: usize,
    filters: usize,
}

impl BackwardRule for Conv2d {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (x, k) = (inputs[0], inputs[1]);
        let win = &self.win;
        let (rows, ncols) = (win.col_rows(), win.col_cols());
        let in_len = win.channels * win.height * win.width;
        let out_len = self.filters * ncols;
        let mut dx = vec![0.0; x.numel()];
        let mut dk = vec![0.0; k.numel()];
        let mut cols = vec![0.0; rows * ncols];
        let mut dcols = vec![0.0; rows * ncols];
        for b in 0..self.batch {
            let xb = &x.data()[b * in_len..(b + 1) * in_len];
            let gb = &grad.data()[b * out_len..(b + 1) * out_len];
            linalg::im2col(xb, win, &mut cols);
            linalg::matmul_nt(gb, &cols, &mut dk, self.filters, ncols, rows, true);
            linalg::matmul_tn(k.data(), gb, &mut dcols, rows, self.filters, ncols, false);
            linalg::col2im(&dcols, win, &mut dx[b * in_len..(b + 1) * in_len]);
        }
        Ok(vec![Some(Tensor::new(x.shape(), dx)?), Some(Tensor::new(k.shape(), dk)?)])
    }
}

/// Cross-correlation of `x: [B, C, H, W]` with `kernel: [F, C, Kh, Kw]`.
pub fn conv2d(tape: &mut Tape, x: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
    let (xt, kt) = (tape.value(x), tape.value(kernel));
    let [batch, channels, height, width] = nchw(xt, "conv2d")?;
    let [filters, kc, kernel_h, kernel_w] = kernel_dims(kt)?;
    if kc != channels {
        return Err(Error::dim(format!("conv2d kernel expects {kc} input channels, got {channels}")));
    }
    let out_h = conv_output_size(height, kernel_h, stride, pad)?;
    let out_w = conv_output_size(width, kernel_w, stride, pad)?;
    let win = Window { channels, height, width, kernel_h, kernel_w, stride, pad, out_h, out_w };
    let (rows, ncols) = (win.col_rows(), win.col_cols());
    let in_len = channels * height * width;
    let out_len = filters * ncols;
    let mut out = vec![0.0; batch * out_len];
    let mut cols = vec![0.0; rows * ncols];
    for b in 0..batch {
        linalg::im2col(&xt.data()[b * in_len..(b + 1) * in_len], &win, &mut cols);
        linalg::matmul_nn(kt.data(), &cols, &mut out[b * out_len..(b + 1) * out_len], filters, rows, ncols, false);
    }
    let out = Tensor::new(&[batch, filters, out_h, out_w], out)?;
    tape.push(&[x, kernel], out, Conv2d { win, batch, filters })
}

struct Conv2dTranspose {
    /// Window of the equivalent forward convolution, applied to the output.
    win: Window,
    batch: usize,
    filters: usize,
}

impl BackwardRule for Conv2dTranspose {
    fn name(&self) -> &'static str {
        "conv2d_transpose"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let (x, k) = (inputs[0], inputs[1]);
        let win = &self.win;
        let (rows, ncols) = (win.col_rows(), win.col_cols());
        let in_len = self.filters * ncols;
        let out_len = win.channels * win.height * win.width;
        let mut dx = vec![0.0; x.numel()];
        let mut dk = vec![0.0; k.numel()];
        let mut cols = vec![0.0; rows * ncols];
        for b in 0..self.batch {
            let xb = &x.data()[b * in_len..(b + 1) * in_len];
            linalg::im2col(&grad.data()[b * out_len..(b + 1) * out_len], win, &mut cols);
            linalg::matmul_nn(k.data(), &cols, &mut dx[b * in_len..(b + 1) * in_len], self.filters, rows, ncols, false);
            linalg::matmul_nt(xb, &cols, &mut dk, self.filters, ncols, rows, true);
        }
        Ok(vec![Some(Tensor::new(x.shape(), dx)?), Some(Tensor::new(k.shape(), dk)?)])
    }
}

/// Transposed convolution of `x: [B, F, H, W]` with `kernel: [F, C, Kh, Kw]`,
/// producing `[B, C, (H−1)·stride − 2·pad + Kh, …]`.
pub fn conv2d_transpose(tape: &mut Tape, x: Var, kernel: Var, stride: usize, pad: usize) -> Result<Var> {
    let (xt, kt) = (tape.value(x), tape.value(kernel));
    let [batch, in_channels, in_h, in_w] = nchw(xt, "conv2d_transpose")?;
    let [filters, channels, kernel_h, kernel_w] = kernel_dims(kt)?;
    if filters != in_channels {
        return Err(Error::dim(format!(
            "conv2d_transpose kernel expects {filters} input channels, got {in_channels}"
        )));
    }
    let height = conv_transpose_output_size(in_h, kernel_h, stride, pad)?;
    let width = conv_transpose_output_size(in_w, kernel_w, stride, pad)?;
    let win = Window { channels, height, width, kernel_h, kernel_w, stride, pad, out_h: in_h, out_w: in_w };
    if conv_output_size(height, kernel_h, stride, pad)? != in_h || conv_output_size(width, kernel_w, stride, pad)? != in_w {
        return Err(Error::dim("inconsistent transposed-convolution geometry"));
    }
    let (rows, ncols) = (win.col_rows(), win.col_cols());
    let in_len = filters * ncols;
    let out_len = channels * height * width;
    let mut out = vec![0.0; batch * out_len];
    let mut cols = vec![0.0; rows * ncols];
    for b in 0..batch {
        linalg::matmul_tn(kt.data(), &xt.data()[b * in_len..(b + 1) * in_len], &mut cols, rows, filters, ncols, false);
        linalg::col2im(&cols, &win, &mut out[b * out_len..(b + 1) * out_len]);
    }
    let out = Tensor::new(&[batch, channels, height, width], out)?;
    tape.push(&[x, kernel], out, Conv2dTranspose { win, batch, filters })
}

struct ChannelBias;

impl BackwardRule for ChannelBias {
    fn name(&self) -> &'static str {
        "channel_bias"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        let channels = inputs[1].numel();
        let plane = grad.numel() / (inputs[0].shape()[0] * channels).max(1);
        let mut db = vec![0.0; channels];
        for (i, g) in grad.data().chunks(plane.max(1)).enumerate() {
            db[i % channels] += g.iter().sum::<f64>();
        }
        Ok(vec![Some(grad.clone()), Some(Tensor::from_vec(db))])
    }
}

/// Adds `bias[c]` to every element of channel `c` of `x: [B, C, ...]`.
pub fn add_channel_bias(tape: &mut Tape, x: Var, bias: Var) -> Result<Var> {
    let (xt, bt) = (tape.value(x), tape.value(bias));
    let channels = match xt.shape() {
        [_, c, ..] if bt.shape() == [*c] => *c,
        s => return Err(Error::dim(format!("channel bias {:?} does not fit input {s:?}", bt.shape()))),
    };
    let plane = xt.numel() / (xt.shape()[0] * channels).max(1);
    let mut out = xt.clone();
    if plane > 0 {
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let b = bt.data()[i % channels];
            chunk.iter_mut().for_each(|v| *v += b);
        }
    }
    tape.push(&[x, bias], out, ChannelBias)
}

/// Copies between a padded and an unpadded NCHW layout. `grow` pads with
/// `fill`; otherwise the border of width `amount` is dropped.
fn repad(src: &Tensor, amount: usize, grow: bool, fill: f64) -> Tensor {
    let [b, c, h, w] = <[usize; 4]>::try_from(src.shape()).expect("checked by caller");
    let (oh, ow) = if grow { (h + 2 * amount, w + 2 * amount) } else { (h - 2 * amount, w - 2 * amount) };
    let mut out = Tensor::full(&[b, c, oh, ow], fill);
    let (inner_h, inner_w) = if grow { (h, w) } else { (oh, ow) };
    for plane in 0..b * c {
        for r in 0..inner_h {
            let (sr, dr, sc, dc) = if grow { (r, r + amount, 0, amount) } else { (r + amount, r, amount, 0) };
            let src_off = plane * h * w + sr * w + sc;
            let dst_off = plane * oh * ow + dr * ow + dc;
            out.data_mut()[dst_off..dst_off + inner_w].copy_from_slice(&src.data()[src_off..src_off + inner_w]);
        }
    }
    out
}

struct Pad2d(usize);

impl BackwardRule for Pad2d {
    fn name(&self) -> &'static str {
        "pad2d"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(repad(grad, self.0, false, 0.0))])
    }
}

struct Crop2d(usize);

impl BackwardRule for Crop2d {
    fn name(&self) -> &'static str {
        "crop2d"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(repad(grad, self.0, true, 0.0))])
    }
}

/// Surrounds each spatial plane with a border of `amount` cells set to `fill`.
pub fn pad2d(tape: &mut Tape, x: Var, amount: usize, fill: f64) -> Result<Var> {
    nchw(tape.value(x), "pad2d")?;
    let out = repad(tape.value(x), amount, true, fill);
    tape.push(&[x], out, Pad2d(amount))
}

/// Removes a border of `amount` cells from each spatial plane.
pub fn crop2d(tape: &mut Tape, x: Var, amount: usize) -> Result<Var> {
    let [_, _, h, w] = nchw(tape.value(x), "crop2d")?;
    if 2 * amount >= h || 2 * amount >= w {
        return Err(Error::dim(format!("cannot crop {amount} from a {h}×{w} plane")));
    }
    let out = repad(tape.value(x), amount, false, 0.0);
    tape.push(&[x], out, Crop2d(amount))
}
