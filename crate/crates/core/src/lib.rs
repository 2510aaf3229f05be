//! Tensor autograd, layers, GAN training and classifier evaluation.

pub mod autograd;
pub mod data;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod layers;
mod linalg;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod params;
pub mod sampling;
pub mod tensor;
pub mod train;

pub use autograd::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use params::{Binding, Param, ParamSet};
pub use tensor::Tensor;
