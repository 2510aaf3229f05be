//! Differentiable layer primitives.
//!
//! Each primitive is a free function taking the tape and explicit parameter
//! handles; parameter storage and initialization belong to the model zoo.

mod activation;
mod conv;
mod loss;
mod norm;
mod pool;

pub use activation::{leaky_relu, relu, sigmoid, tanh};
pub use conv::{
    add_channel_bias, conv2d, conv2d_transpose, conv_output_size, conv_transpose_output_size, crop2d, pad2d,
};
pub use loss::{bce_from_probability, hinge_loss, softmax_cross_entropy, softmax_rows, PROB_CLAMP};
pub use norm::{batchnorm, BatchNormMode, BatchNormState, RunningStats};
pub use pool::{global_avg_pool, maxpool2d};

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;
pub const DEFAULT_BN_EPS: f64 = 1e-5;
pub const DEFAULT_BN_MOMENTUM: f64 = 0.1;

/// `x · w + b` for `x: [B, n]`, `w: [n, m]`, `b: [m]`.
pub fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    if tape.shape(b) != [tape.shape(xw)[1]] {
        return Err(Error::dim(format!(
            "affine bias {:?} does not match output width {}",
            tape.shape(b),
            tape.shape(xw)[1]
        )));
    }
    tape.add(xw, b)
}

/// Discriminant of [`LayerConfig`], for structural queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Affine,
    Conv2d,
    Conv2dTranspose,
    Maxpool,
    Batchnorm,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Flatten,
    Reshape,
    Pad,
    Crop,
    GlobalAvgPool,
}

/// One layer of a model together with its hyperparameters.
///
/// Shapes in this type are per sample; the batch axis is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerConfig {
    Affine { in_features: usize, out_features: usize },
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize, bias: bool },
    Conv2dTranspose { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, pad: usize, bias: bool },
    Maxpool { window: usize, stride: usize },
    Batchnorm { channels: usize, momentum: f64, eps: f64 },
    Relu,
    LeakyRelu { alpha: f64 },
    Tanh,
    Sigmoid,
    Flatten,
    Reshape { shape: Vec<usize> },
    Pad { amount: usize, fill: f64 },
    Crop { amount: usize },
    GlobalAvgPool,
}

/// How a parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Centered normal with the model's weight std.
    Weight,
    /// Normal around 1 with the model's weight std (batchnorm γ).
    Scale,
    Zeros,
    Ones,
}

/// Parameter declared by a layer: name suffix, shape, trainable flag, init.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub suffix: &'static str,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub init: Init,
}

impl ParamDecl {
    fn new(suffix: &'static str, shape: Vec<usize>, trainable: bool, init: Init) -> Self {
        ParamDecl { suffix, shape, trainable, init }
    }
}

impl LayerConfig {
    pub fn kind(&self) -> LayerKind {
        match self {
            LayerConfig::Affine { .. } => LayerKind::Affine,
            LayerConfig::Conv2d { .. } => LayerKind::Conv2d,
            LayerConfig::Conv2dTranspose { .. } => LayerKind::Conv2dTranspose,
            LayerConfig::Maxpool { .. } => LayerKind::Maxpool,
            LayerConfig::Batchnorm { .. } => LayerKind::Batchnorm,
            LayerConfig::Relu => LayerKind::Relu,
            LayerConfig::LeakyRelu { .. } => LayerKind::LeakyRelu,
            LayerConfig::Tanh => LayerKind::Tanh,
            LayerConfig::Sigmoid => LayerKind::Sigmoid,
            LayerConfig::Flatten => LayerKind::Flatten,
            LayerConfig::Reshape { .. } => LayerKind::Reshape,
            LayerConfig::Pad { .. } => LayerKind::Pad,
            LayerConfig::Crop { .. } => LayerKind::Crop,
            LayerConfig::GlobalAvgPool => LayerKind::GlobalAvgPool,
        }
    }

    pub fn batchnorm(channels: usize) -> Self {
        LayerConfig::Batchnorm { channels, momentum: DEFAULT_BN_MOMENTUM, eps: DEFAULT_BN_EPS }
    }

    pub fn leaky_relu() -> Self {
        LayerConfig::LeakyRelu { alpha: DEFAULT_LEAKY_SLOPE }
    }

    /// Checks hyperparameter ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::contract(msg));
        match *self {
            LayerConfig::Conv2d { kernel, stride, .. } | LayerConfig::Conv2dTranspose { kernel, stride, .. }
                if kernel == 0 || stride == 0 =>
            {
                bad(format!("kernel ({kernel}) and stride ({stride}) must be at least 1"))
            }
            LayerConfig::Maxpool { window, stride } if window == 0 || stride == 0 => {
                bad(format!("pool window ({window}) and stride ({stride}) must be at least 1"))
            }
            LayerConfig::LeakyRelu { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                bad(format!("leaky slope {alpha} outside (0, 1)"))
            }
            LayerConfig::Batchnorm { momentum, eps, .. } if !(momentum > 0.0 && momentum < 1.0) || !(eps > 0.0) => {
                bad(format!("batchnorm momentum {momentum} must lie in (0, 1) and eps {eps} be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        let chw = |what: &str| -> Result<[usize; 3]> {
            <[usize; 3]>::try_from(input).map_err(|_| Error::dim(format!("{what} expects [C, H, W], got {input:?}")))
        };
        match self {
            LayerConfig::Affine { in_features, out_features } => match input {
                [n] if n == in_features => Ok(vec![*out_features]),
                _ => Err(Error::dim(format!("affine expects [{in_features}], got {input:?}"))),
            },
            LayerConfig::Conv2d { in_channels, out_channels, kernel, stride, pad, .. } => {
                let [c, h, w] = chw("conv2d")?;
                if c != *in_channels {
                    return Err(Error::dim(format!("conv2d expects {in_channels} channels, got {c}")));
                }
                Ok(vec![
                    *out_channels,
                    conv_output_size(h, *kernel, *stride, *pad)?,
                    conv_output_size(w, *kernel, *stride, *pad)?,
                ])
            }
            LayerConfig::Conv2dTranspose { in_channels, out_channels, kernel, stride, pad, .. } => {
                let [c, h, w] = chw("conv2d_transpose")?;
                if c != *in_channels {
                    return Err(Error::dim(format!("conv2d_transpose expects {in_channels} channels, got {c}")));
                }
                Ok(vec![
                    *out_channels,
                    conv_transpose_output_size(h, *kernel, *stride, *pad)?,
                    conv_transpose_output_size(w, *kernel, *stride, *pad)?,
                ])
            }
            LayerConfig::Maxpool { window, stride } => {
                let [c, h, w] = chw("maxpool")?;
                if *window > h || *window > w {
                    return Err(Error::dim(format!("pool window {window} exceeds {h}×{w}")));
                }
                Ok(vec![c, (h - window) / stride + 1, (w - window) / stride + 1])
            }
            LayerConfig::Batchnorm { channels, .. } => match input.first() {
                Some(c) if c == channels => Ok(input.to_vec()),
                _ => Err(Error::dim(format!("batchnorm over {channels} channels got {input:?}"))),
            },
            LayerConfig::Relu | LayerConfig::LeakyRelu { .. } | LayerConfig::Tanh | LayerConfig::Sigmoid => {
                Ok(input.to_vec())
            }
            LayerConfig::Flatten => Ok(vec![input.iter().product()]),
            LayerConfig::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(Error::dim(format!("cannot reshape {input:?} to {shape:?}")));
                }
                Ok(shape.clone())
            }
            LayerConfig::Pad { amount, .. } => {
                let [c, h, w] = chw("pad")?;
                Ok(vec![c, h + 2 * amount, w + 2 * amount])
            }
            LayerConfig::Crop { amount } => {
                let [c, h, w] = chw("crop")?;
                if 2 * amount >= h || 2 * amount >= w {
                    return Err(Error::dim(format!("cannot crop {amount} from {h}×{w}")));
                }
                Ok(vec![c, h - 2 * amount, w - 2 * amount])
            }
            LayerConfig::GlobalAvgPool => {
                let [c, _, _] = chw("global_avg_pool")?;
                Ok(vec![c])
            }
        }
    }

    /// Parameters this layer owns.
    pub fn params(&self) -> Vec<ParamDecl> {
        match *self {
            LayerConfig::Affine { in_features, out_features } => vec![
                ParamDecl::new("weight", vec![in_features, out_features], true, Init::Weight),
                ParamDecl::new("bias", vec![out_features], true, Init::Zeros),
            ],
            LayerConfig::Conv2d { in_channels, out_channels, kernel, bias, .. } => {
                let mut p = vec![ParamDecl::new("weight", vec![out_channels, in_channels, kernel, kernel], true, Init::Weight)];
                if bias {
                    p.push(ParamDecl::new("bias", vec![out_channels], true, Init::Zeros));
                }
                p
            }
            LayerConfig::Conv2dTranspose { in_channels, out_channels, kernel, bias, .. } => {
                let mut p = vec![ParamDecl::new("weight", vec![in_channels, out_channels, kernel, kernel], true, Init::Weight)];
                if bias {
                    p.push(ParamDecl::new("bias", vec![out_channels], true, Init::Zeros));
                }
                p
            }
            LayerConfig::Batchnorm { channels, .. } => vec![
                ParamDecl::new("gamma", vec![channels], true, Init::Scale),
                ParamDecl::new("beta", vec![channels], true, Init::Zeros),
                ParamDecl::new("running_mean", vec![channels], false, Init::Zeros),
                ParamDecl::new("running_var", vec![channels], false, Init::Ones),
            ],
            _ => Vec::new(),
        }
    }
}
