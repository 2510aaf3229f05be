//! Dense kernels shared by matmul and the convolution layers.
//!
//! All matrices are row-major slices. Every kernel accumulates in a fixed
//! order so results are bitwise reproducible.

/// `c (+)= a · b` with `a: m×k`, `b: k×n`, `c: m×n`.
pub(crate) fn matmul_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if !accumulate {
        c.fill(0.0);
    }
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c (+)= aᵀ · b` with `a: k×m`, `b: k×n`, `c: m×n`.
pub(crate) fn matmul_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if !accumulate {
        c.fill(0.0);
    }
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c (+)= a · bᵀ` with `a: m×k`, `b: n×k`, `c: m×n`.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let d = dot(a_row, &b[j * k..(j + 1) * k]);
            let cv = &mut c[i * n + j];
            *cv = if accumulate { *cv + d } else { d };
        }
    }
}

/// Dot product with four independent accumulators, combined in a fixed order.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Geometry of a 2-D sliding window over one `channels × height × width` image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Window {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Window {
    /// Rows of the unfolded matrix: one per (channel, kernel row, kernel col).
    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds an image into a `col_rows × col_cols` matrix; padding reads as zero.
pub(crate) fn im2col(image: &[f64], win: &Window, cols: &mut [f64]) {
    let ncols = win.col_cols();
    debug_assert_eq!(image.len(), win.channels * win.height * win.width);
    debug_assert_eq!(cols.len(), win.col_rows() * ncols);
    let (h, w, pad) = (win.height as isize, win.width as isize, win.pad as isize);
    let mut row = 0;
    for c in 0..win.channels {
        let plane = &image[c * win.height * win.width..(c + 1) * win.height * win.width];
        for kh in 0..win.kernel_h {
            for kw in 0..win.kernel_w {
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oh in 0..win.out_h {
                    let ih = (oh * win.stride + kh) as isize - pad;
                    let line = &mut dst[oh * win.out_w..(oh + 1) * win.out_w];
                    if ih < 0 || ih >= h {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[ih as usize * win.width..(ih as usize + 1) * win.width];
                    for (ow, v) in line.iter_mut().enumerate() {
                        let iw = (ow * win.stride + kw) as isize - pad;
                        *v = if iw < 0 || iw >= w { 0.0 } else { src[iw as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into an image.
pub(crate) fn col2im(cols: &[f64], win: &Window, image: &mut [f64]) {
    let ncols = win.col_cols();
    debug_assert_eq!(image.len(), win.channels * win.height * win.width);
    debug_assert_eq!(cols.len(), win.col_rows() * ncols);
    let (h, w, pad) = (win.height as isize, win.width as isize, win.pad as isize);
    let mut row = 0;
    for c in 0..win.channels {
        let plane = &mut image[c * win.height * win.width..(c + 1) * win.height * win.width];
        for kh in 0..win.kernel_h {
            for kw in 0..win.kernel_w {
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oh in 0..win.out_h {
                    let ih = (oh * win.stride + kh) as isize - pad;
                    if ih < 0 || ih >= h {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * win.width..(ih as usize + 1) * win.width];
                    for ow in 0..win.out_w {
                        let iw = (ow * win.stride + kw) as isize - pad;
                        if iw >= 0 && iw < w {
                            dst[iw as usize] += src[oh * win.out_w + ow];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}
