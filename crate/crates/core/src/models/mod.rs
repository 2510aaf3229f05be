//! Network builders, parameter initialization and the forward pass.
//!
//! A [`ModelSpec`] is an immutable description: a trunk of stages followed by
//! zero or more heads. Parameters live in a separate [`ParamSet`] whose names
//! are `"{layer}.{suffix}"`, so one spec can drive many parameter sets.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{self, BatchNormMode, BatchNormState, Init, LayerConfig, LayerKind, RunningStats};
use crate::params::{Binding, ParamSet};
use crate::tensor::Tensor;

pub const DEFAULT_INIT_STD: f64 = 0.02;

/// What a model is for. Written into checkpoints and checked by consumers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Generator,
    Discriminator,
    GanClassifier,
    Cnn,
    Resnet,
    LinearSvm,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Generator => "generator",
            ModelKind::Discriminator => "discriminator",
            ModelKind::GanClassifier => "gan-classifier",
            ModelKind::Cnn => "cnn",
            ModelKind::Resnet => "resnet",
            ModelKind::LinearSvm => "linear-svm",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            ModelKind::Generator,
            ModelKind::Discriminator,
            ModelKind::GanClassifier,
            ModelKind::Cnn,
            ModelKind::Resnet,
            ModelKind::LinearSvm,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }

    /// True for models whose first head yields class scores.
    pub fn is_classifier(self) -> bool {
        matches!(self, ModelKind::GanClassifier | ModelKind::Cnn | ModelKind::Resnet | ModelKind::LinearSvm)
    }
}

/// Everything needed to rebuild a model. Serialized into checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Recipe {
    /// Transposed-convolution generator. `widths` run from the 4×4 projection
    /// to the last hidden block.
    Generator { noise_dim: usize, out_channels: usize, out_size: usize, widths: Vec<usize> },
    /// Strided-convolution discriminator. `widths` run from the input block.
    Discriminator { in_channels: usize, in_size: usize, widths: Vec<usize> },
    /// Discriminator trunk with a class head and a real/fake head.
    GanClassifier { in_channels: usize, in_size: usize, classes: usize, widths: Vec<usize> },
    Cnn { in_channels: usize, in_size: usize, classes: usize, channels: [usize; 2], hidden: usize },
    Resnet { in_channels: usize, in_size: usize, classes: usize, blocks: usize, width: usize },
    LinearSvm { input_shape: Vec<usize>, classes: usize },
    /// Fully connected generator for low-dimensional data.
    MlpGenerator { noise_dim: usize, hidden: Vec<usize>, output_shape: Vec<usize> },
    /// Fully connected discriminator for low-dimensional data.
    MlpDiscriminator { input_shape: Vec<usize>, hidden: Vec<usize> },
}

impl Recipe {
    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            Recipe::Generator { noise_dim, out_channels, out_size, widths } => {
                build_generator(*noise_dim, *out_channels, *out_size, widths)
            }
            Recipe::Discriminator { in_channels, in_size, widths } => build_discriminator(*in_channels, *in_size, widths),
            Recipe::GanClassifier { in_channels, in_size, classes, widths } => {
                build_gan_classifier(*in_channels, *in_size, *classes, widths)
            }
            Recipe::Cnn { in_channels, in_size, classes, channels, hidden } => {
                build_cnn(*in_channels, *in_size, *classes, *channels, *hidden)
            }
            Recipe::Resnet { in_channels, in_size, classes, blocks, width } => {
                build_resnet(*in_channels, *in_size, *classes, *blocks, *width)
            }
            Recipe::LinearSvm { input_shape, classes } => build_linear_svm(input_shape, *classes),
            Recipe::MlpGenerator { noise_dim, hidden, output_shape } => build_mlp_generator(*noise_dim, hidden, output_shape),
            Recipe::MlpDiscriminator { input_shape, hidden } => build_mlp_discriminator(input_shape, hidden),
        }
    }
}

/// One element of a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Layer { name: String, config: LayerConfig },
    /// `branch(x) + skip(x)` where `skip` is the identity or a projection.
    Residual { name: String, branch: Vec<Stage>, projection: Option<Vec<Stage>> },
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::Layer { name, .. } | Stage::Residual { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Batch statistics in batchnorm; updated running statistics are returned.
    Train,
    /// Running statistics in batchnorm.
    Eval,
}

/// Result of a forward pass.
#[derive(Debug)]
pub struct ForwardOutput {
    /// One entry per head, or a single entry for a headless model.
    pub outputs: Vec<Var>,
    /// Running-statistics updates keyed by batchnorm layer name. Empty in eval
    /// mode. Apply them with [`ModelSpec::apply_stats`].
    pub stats: Vec<(String, RunningStats)>,
}

impl ForwardOutput {
    pub fn output(&self) -> Var {
        self.outputs[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    kind: ModelKind,
    recipe: Recipe,
    input_shape: Vec<usize>,
    trunk: Vec<Stage>,
    heads: Vec<Vec<Stage>>,
    output_shapes: Vec<Vec<usize>>,
    init_std: f64,
}

/// Appends auto-named layers to a stage list.
struct StageList {
    prefix: String,
    stages: Vec<Stage>,
}

impl StageList {
    fn new(prefix: impl Into<String>) -> Self {
        StageList { prefix: prefix.into(), stages: Vec::new() }
    }

    fn next_name(&self) -> String {
        format!("{}.{}", self.prefix, self.stages.len())
    }

    fn layer(&mut self, config: LayerConfig) -> &mut Self {
        let name = self.next_name();
        self.stages.push(Stage::Layer { name, config });
        self
    }

    fn residual(&mut self, build: impl FnOnce(&mut StageList, Option<&mut StageList>), project: bool) -> &mut Self {
        let name = self.next_name();
        let mut branch = StageList::new(format!("{name}.branch"));
        let mut projection = project.then(|| StageList::new(format!("{name}.skip")));
        build(&mut branch, projection.as_mut());
        self.stages.push(Stage::Residual { name, branch: branch.stages, projection: projection.map(|p| p.stages) });
        self
    }
}

fn stage_output_shape(stage: &Stage, input: &[usize]) -> Result<Vec<usize>> {
    match stage {
        Stage::Layer { config, .. } => config.output_shape(input),
        Stage::Residual { name, branch, projection } => {
            let out = stages_output_shape(branch, input)?;
            let skip = match projection {
                Some(p) => stages_output_shape(p, input)?,
                None => input.to_vec(),
            };
            if out != skip {
                return Err(Error::dim(format!("residual `{name}`: branch gives {out:?}, skip gives {skip:?}")));
            }
            Ok(out)
        }
    }
}

fn stages_output_shape(stages: &[Stage], input: &[usize]) -> Result<Vec<usize>> {
    stages.iter().try_fold(input.to_vec(), |shape, s| stage_output_shape(s, &shape))
}

fn collect_layers<'a>(stages: &'a [Stage], out: &mut Vec<(&'a str, &'a LayerConfig)>) {
    for s in stages {
        match s {
            Stage::Layer { name, config } => out.push((name, config)),
            Stage::Residual { branch, projection, .. } => {
                collect_layers(branch, out);
                if let Some(p) = projection {
                    collect_layers(p, out);
                }
            }
        }
    }
}

impl ModelSpec {
    fn assemble(kind: ModelKind, recipe: Recipe, input_shape: Vec<usize>, trunk: Vec<Stage>, heads: Vec<Vec<Stage>>) -> Result<Self> {
        let trunk_out = stages_output_shape(&trunk, &input_shape)?;
        let output_shapes = if heads.is_empty() {
            vec![trunk_out]
        } else {
            heads.iter().map(|h| stages_output_shape(h, &trunk_out)).collect::<Result<_>>()?
        };
        Ok(ModelSpec { kind, recipe, input_shape, trunk, heads, output_shapes, init_std: DEFAULT_INIT_STD })
    }

    /// Overrides the standard deviation of the weight initialization.
    pub fn with_init_std(mut self, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::contract(format!("init std must be positive, got {std}")));
        }
        self.init_std = std;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn recipe(&self) -> &Recipe {
        &self.recipe
    }

    /// Per-sample input shape.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// Per-sample output shape of each head (or of the trunk when headless).
    pub fn output_shapes(&self) -> &[Vec<usize>] {
        &self.output_shapes
    }

    pub fn trunk(&self) -> &[Stage] {
        &self.trunk
    }

    pub fn heads(&self) -> &[Vec<Stage>] {
        &self.heads
    }

    /// All layers in forward order: trunk, then each head. Residual branches
    /// come before their projection.
    pub fn layers(&self) -> Vec<(&str, &LayerConfig)> {
        let mut out = Vec::new();
        collect_layers(&self.trunk, &mut out);
        for h in &self.heads {
            collect_layers(h, &mut out);
        }
        out
    }

    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        self.layers().iter().map(|(_, c)| c.kind()).collect()
    }

    /// Expected parameter names and shapes, in initialization order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>, bool)> {
        self.layers()
            .into_iter()
            .flat_map(|(name, config)| {
                config.params().into_iter().map(move |d| (format!("{name}.{}", d.suffix), d.shape, d.trainable))
            })
            .collect()
    }

    /// Draws a fresh parameter set.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParamSet> {
        let mut ps = ParamSet::new();
        for (name, config) in self.layers() {
            for d in config.params() {
                let value = match d.init {
                    Init::Weight => Tensor::randn(&d.shape, 0.0, self.init_std, rng),
                    Init::Scale => Tensor::randn(&d.shape, 1.0, self.init_std, rng),
                    Init::Zeros => Tensor::zeros(&d.shape),
                    Init::Ones => Tensor::ones(&d.shape),
                };
                ps.insert(format!("{name}.{}", d.suffix), value, d.trainable)?;
            }
        }
        Ok(ps)
    }

    /// Checks that `params` has exactly the names and shapes this spec expects.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let expected = self.param_shapes();
        if expected.len() != params.len() {
            return Err(Error::Consistency(format!(
                "{} model expects {} tensors, got {}",
                self.kind.tag(),
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape, trainable), p) in expected.iter().zip(params.iter()) {
            if *name != p.name || *shape != p.value.shape() || *trainable != p.trainable {
                return Err(Error::Consistency(format!(
                    "expected tensor `{name}` {shape:?}, found `{}` {:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        Ok(())
    }

    /// Runs the model on `x: [B, ...input_shape]`.
    pub fn forward(&self, params: &ParamSet, binding: &Binding, tape: &mut Tape, x: Var, mode: ForwardMode) -> Result<ForwardOutput> {
        let shape = tape.shape(x);
        if shape.len() != self.input_shape.len() + 1 || shape[1..] != self.input_shape[..] {
            return Err(Error::dim(format!(
                "{} expects input [B, {:?}], got {:?}",
                self.kind.tag(),
                self.input_shape,
                shape
            )));
        }
        let mut ctx = Context { params, binding, tape, mode, stats: Vec::new() };
        let features = ctx.run(&self.trunk, x)?;
        let outputs = if self.heads.is_empty() {
            vec![features]
        } else {
            self.heads.iter().map(|h| ctx.run(h, features)).collect::<Result<_>>()?
        };
        Ok(ForwardOutput { outputs, stats: ctx.stats })
    }

    /// Forward pass on a plain tensor with constant parameters.
    pub fn predict(&self, params: &ParamSet, x: &Tensor, mode: ForwardMode) -> Result<Vec<Tensor>> {
        let mut tape = Tape::new();
        let binding = params.bind(&mut tape, false)?;
        let xv = tape.constant(x.clone())?;
        let out = self.forward(params, &binding, &mut tape, xv, mode)?;
        Ok(out.outputs.iter().map(|&v| tape.value(v).clone()).collect())
    }

    /// Writes running-statistics updates back into `params`.
    pub fn apply_stats(params: &mut ParamSet, stats: Vec<(String, RunningStats)>) -> Result<()> {
        for (layer, s) in stats {
            params.set(&format!("{layer}.running_mean"), s.mean)?;
            params.set(&format!("{layer}.running_var"), s.var)?;
        }
        Ok(())
    }
}

struct Context<'a> {
    params: &'a ParamSet,
    binding: &'a Binding,
    tape: &'a mut Tape,
    mode: ForwardMode,
    stats: Vec<(String, RunningStats)>,
}

impl<'a> Context<'a> {
    fn var(&self, layer: &str, suffix: &str) -> Result<Var> {
        self.binding.var(&format!("{layer}.{suffix}"))
    }

    fn buffer(&self, layer: &str, suffix: &str) -> Result<&'a Tensor> {
        let params: &'a ParamSet = self.params;
        let name = format!("{layer}.{suffix}");
        params.get(&name).ok_or_else(|| Error::contract(format!("missing buffer `{name}`")))
    }

    fn run(&mut self, stages: &[Stage], mut x: Var) -> Result<Var> {
        for s in stages {
            x = match s {
                Stage::Layer { name, config } => self.layer(name, config, x)?,
                Stage::Residual { branch, projection, .. } => {
                    let out = self.run(branch, x)?;
                    let skip = match projection {
                        Some(p) => self.run(p, x)?,
                        None => x,
                    };
                    self.tape.add(out, skip)?
                }
            };
        }
        Ok(x)
    }

    fn layer(&mut self, name: &str, config: &LayerConfig, x: Var) -> Result<Var> {
        match *config {
            LayerConfig::Affine { .. } => {
                let (w, b) = (self.var(name, "weight")?, self.var(name, "bias")?);
                layers::affine(self.tape, x, w, b)
            }
            LayerConfig::Conv2d { stride, pad, bias, .. } => {
                let y = layers::conv2d(self.tape, x, self.var(name, "weight")?, stride, pad)?;
                if bias {
                    layers::add_channel_bias(self.tape, y, self.var(name, "bias")?)
                } else {
                    Ok(y)
                }
            }
            LayerConfig::Conv2dTranspose { stride, pad, bias, .. } => {
                let y = layers::conv2d_transpose(self.tape, x, self.var(name, "weight")?, stride, pad)?;
                if bias {
                    layers::add_channel_bias(self.tape, y, self.var(name, "bias")?)
                } else {
                    Ok(y)
                }
            }
            LayerConfig::Maxpool { window, stride } => layers::maxpool2d(self.tape, x, window, stride),
            LayerConfig::Batchnorm { momentum, eps, .. } => {
                let state = BatchNormState {
                    gamma: self.var(name, "gamma")?,
                    beta: self.var(name, "beta")?,
                    running_mean: self.buffer(name, "running_mean")?,
                    running_var: self.buffer(name, "running_var")?,
                    mode: match self.mode {
                        ForwardMode::Train => BatchNormMode::Train,
                        ForwardMode::Eval => BatchNormMode::Eval,
                    },
                    eps,
                    momentum,
                };
                let (y, stats) = layers::batchnorm(self.tape, x, state)?;
                if let Some(s) = stats {
                    self.stats.push((name.to_string(), s));
                }
                Ok(y)
            }
            LayerConfig::Relu => layers::relu(self.tape, x),
            LayerConfig::LeakyRelu { alpha } => layers::leaky_relu(self.tape, x, alpha),
            LayerConfig::Tanh => layers::tanh(self.tape, x),
            LayerConfig::Sigmoid => layers::sigmoid(self.tape, x),
            LayerConfig::Flatten => self.tape.flatten(x),
            LayerConfig::Reshape { ref shape } => {
                let mut full = vec![self.tape.shape(x)[0]];
                full.extend_from_slice(shape);
                self.tape.reshape(x, &full)
            }
            LayerConfig::Pad { amount, fill } => layers::pad2d(self.tape, x, amount, fill),
            LayerConfig::Crop { amount } => layers::crop2d(self.tape, x, amount),
            LayerConfig::GlobalAvgPool => layers::global_avg_pool(self.tape, x),
        }
    }
}

/// Image sizes the strided generator and discriminator support. 28 is padded
/// to 32 internally.
fn padded_size(size: usize) -> Result<(usize, usize)> {
    match size {
        32 => Ok((32, 0)),
        28 => Ok((32, 2)),
        other => Err(Error::contract(format!("image size {other} is not supported (expected 28 or 32)"))),
    }
}

fn check_widths(widths: &[usize], expected: usize) -> Result<()> {
    if widths.len() != expected || widths.contains(&0) {
        return Err(Error::contract(format!("expected {expected} positive widths, got {widths:?}")));
    }
    Ok(())
}

fn check_positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::contract(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// Number of stride-2 blocks between 4×4 and 32×32.
const UPSAMPLING_BLOCKS: usize = 3;

fn strided(in_channels: usize, out_channels: usize, bias: bool) -> LayerConfig {
    LayerConfig::Conv2d { in_channels, out_channels, kernel: 4, stride: 2, pad: 1, bias }
}

fn upsampling(in_channels: usize, out_channels: usize, bias: bool) -> LayerConfig {
    LayerConfig::Conv2dTranspose { in_channels, out_channels, kernel: 4, stride: 2, pad: 1, bias }
}

/// Noise `[B, noise_dim]` to images `[B, out_channels, out_size, out_size]`
/// in (−1, 1).
///
/// Projection to `widths[0]×4×4`, then two stride-2 transposed convolutions
/// with batchnorm and ReLU, then a final stride-2 transposed convolution and
/// Tanh. 28×28 output is cropped from 32×32.
pub fn build_generator(noise_dim: usize, out_channels: usize, out_size: usize, widths: &[usize]) -> Result<ModelSpec> {
    check_positive("noise dimension", noise_dim)?;
    check_positive("output channels", out_channels)?;
    let (_, crop) = padded_size(out_size)?;
    check_widths(widths, UPSAMPLING_BLOCKS)?;
    let mut t = StageList::new("g");
    t.layer(LayerConfig::Affine { in_features: noise_dim, out_features: widths[0] * 16 })
        .layer(LayerConfig::Reshape { shape: vec![widths[0], 4, 4] })
        .layer(LayerConfig::batchnorm(widths[0]))
        .layer(LayerConfig::Relu);
    for pair in widths.windows(2) {
        t.layer(upsampling(pair[0], pair[1], false)).layer(LayerConfig::batchnorm(pair[1])).layer(LayerConfig::Relu);
    }
    t.layer(upsampling(widths[UPSAMPLING_BLOCKS - 1], out_channels, true)).layer(LayerConfig::Tanh);
    if crop > 0 {
        t.layer(LayerConfig::Crop { amount: crop });
    }
    let recipe = Recipe::Generator { noise_dim, out_channels, out_size, widths: widths.to_vec() };
    ModelSpec::assemble(ModelKind::Generator, recipe, vec![noise_dim], t.stages, Vec::new())
}

/// Convolutional trunk shared by the discriminator and the GAN classifier,
/// ending in flattened features.
fn discriminator_trunk(in_channels: usize, in_size: usize, widths: &[usize]) -> Result<StageList> {
    check_positive("input channels", in_channels)?;
    let (_, pad) = padded_size(in_size)?;
    check_widths(widths, UPSAMPLING_BLOCKS)?;
    let mut t = StageList::new("d");
    if pad > 0 {
        // pad with the normalized value of a black pixel
        t.layer(LayerConfig::Pad { amount: pad, fill: -1.0 });
    }
    t.layer(strided(in_channels, widths[0], true)).layer(LayerConfig::leaky_relu());
    for pair in widths.windows(2) {
        t.layer(strided(pair[0], pair[1], false)).layer(LayerConfig::batchnorm(pair[1])).layer(LayerConfig::leaky_relu());
    }
    t.layer(LayerConfig::Flatten);
    Ok(t)
}

/// Images to one probability per sample, shape `[B, 1]`.
pub fn build_discriminator(in_channels: usize, in_size: usize, widths: &[usize]) -> Result<ModelSpec> {
    let mut t = discriminator_trunk(in_channels, in_size, widths)?;
    t.layer(LayerConfig::Affine { in_features: widths[UPSAMPLING_BLOCKS - 1] * 16, out_features: 1 })
        .layer(LayerConfig::Sigmoid);
    let recipe = Recipe::Discriminator { in_channels, in_size, widths: widths.to_vec() };
    ModelSpec::assemble(ModelKind::Discriminator, recipe, vec![in_channels, in_size, in_size], t.stages, Vec::new())
}

/// Discriminator trunk with two heads: class logits `[B, K]` first, then the
/// real/fake probability `[B, 1]`.
///
/// The class head is initialized before the real/fake head, so dropping the
/// adversarial term reproduces a plain classifier with the same trunk.
pub fn build_gan_classifier(in_channels: usize, in_size: usize, classes: usize, widths: &[usize]) -> Result<ModelSpec> {
    if classes < 2 {
        return Err(Error::contract(format!("a classifier needs at least 2 classes, got {classes}")));
    }
    let t = discriminator_trunk(in_channels, in_size, widths)?;
    let features = widths[UPSAMPLING_BLOCKS - 1] * 16;
    let mut class_head = StageList::new("cls");
    class_head.layer(LayerConfig::Affine { in_features: features, out_features: classes });
    let mut adv_head = StageList::new("adv");
    adv_head.layer(LayerConfig::Affine { in_features: features, out_features: 1 }).layer(LayerConfig::Sigmoid);
    let recipe = Recipe::GanClassifier { in_channels, in_size, classes, widths: widths.to_vec() };
    ModelSpec::assemble(
        ModelKind::GanClassifier,
        recipe,
        vec![in_channels, in_size, in_size],
        t.stages,
        vec![class_head.stages, adv_head.stages],
    )
}

/// Two conv→ReLU→maxpool blocks, then a hidden affine layer and class logits.
pub fn build_cnn(in_channels: usize, in_size: usize, classes: usize, channels: [usize; 2], hidden: usize) -> Result<ModelSpec> {
    check_positive("input channels", in_channels)?;
    check_positive("hidden width", hidden)?;
    check_widths(&channels, 2)?;
    if classes < 2 {
        return Err(Error::contract(format!("a classifier needs at least 2 classes, got {classes}")));
    }
    if in_size < 4 {
        return Err(Error::contract(format!("input size {in_size} is too small for two 2×2 pools")));
    }
    let mut t = StageList::new("cnn");
    let mut c = in_channels;
    for &out in &channels {
        t.layer(LayerConfig::Conv2d { in_channels: c, out_channels: out, kernel: 3, stride: 1, pad: 1, bias: true })
            .layer(LayerConfig::Relu)
            .layer(LayerConfig::Maxpool { window: 2, stride: 2 });
        c = out;
    }
    let side = in_size / 4;
    t.layer(LayerConfig::Flatten)
        .layer(LayerConfig::Affine { in_features: c * side * side, out_features: hidden })
        .layer(LayerConfig::Relu)
        .layer(LayerConfig::Affine { in_features: hidden, out_features: classes });
    let recipe = Recipe::Cnn { in_channels, in_size, classes, channels, hidden };
    ModelSpec::assemble(ModelKind::Cnn, recipe, vec![in_channels, in_size, in_size], t.stages, Vec::new())
}

fn conv3(in_channels: usize, out_channels: usize, stride: usize) -> LayerConfig {
    LayerConfig::Conv2d { in_channels, out_channels, kernel: 3, stride, pad: 1, bias: false }
}

/// Stride-2 stem, `blocks` residual blocks, global average pooling and class
/// logits. The second half of the blocks runs at twice the width and half the
/// resolution; the block that changes shape projects its skip with a 1×1
/// convolution.
pub fn build_resnet(in_channels: usize, in_size: usize, classes: usize, blocks: usize, width: usize) -> Result<ModelSpec> {
    check_positive("input channels", in_channels)?;
    check_positive("block count", blocks)?;
    check_positive("width", width)?;
    if classes < 2 {
        return Err(Error::contract(format!("a classifier needs at least 2 classes, got {classes}")));
    }
    if in_size < 4 {
        return Err(Error::contract(format!("input size {in_size} is too small")));
    }
    let mut t = StageList::new("res");
    t.layer(conv3(in_channels, width, 2)).layer(LayerConfig::batchnorm(width)).layer(LayerConfig::Relu);
    let widen_at = if blocks >= 2 { blocks.div_ceil(2) } else { usize::MAX };
    let mut c = width;
    for b in 0..blocks {
        let (out, stride) = if b == widen_at { (2 * c, 2) } else { (c, 1) };
        let project = out != c || stride != 1;
        t.residual(
            |branch, skip| {
                branch
                    .layer(conv3(c, out, stride))
                    .layer(LayerConfig::batchnorm(out))
                    .layer(LayerConfig::Relu)
                    .layer(conv3(out, out, 1))
                    .layer(LayerConfig::batchnorm(out));
                if let Some(skip) = skip {
                    skip.layer(LayerConfig::Conv2d { in_channels: c, out_channels: out, kernel: 1, stride, pad: 0, bias: false })
                        .layer(LayerConfig::batchnorm(out));
                }
            },
            project,
        );
        c = out;
    }
    t.layer(LayerConfig::GlobalAvgPool).layer(LayerConfig::Affine { in_features: c, out_features: classes });
    let recipe = Recipe::Resnet { in_channels, in_size, classes, blocks, width };
    ModelSpec::assemble(ModelKind::Resnet, recipe, vec![in_channels, in_size, in_size], t.stages, Vec::new())
}

/// One affine layer over the flattened input. Train with the hinge loss.
pub fn build_linear_svm(input_shape: &[usize], classes: usize) -> Result<ModelSpec> {
    let in_dim: usize = input_shape.iter().product();
    if input_shape.is_empty() || in_dim == 0 {
        return Err(Error::contract(format!("invalid input shape {input_shape:?}")));
    }
    if classes < 2 {
        return Err(Error::contract(format!("a classifier needs at least 2 classes, got {classes}")));
    }
    let mut t = StageList::new("svm");
    if input_shape.len() > 1 {
        t.layer(LayerConfig::Flatten);
    }
    t.layer(LayerConfig::Affine { in_features: in_dim, out_features: classes });
    let recipe = Recipe::LinearSvm { input_shape: input_shape.to_vec(), classes };
    ModelSpec::assemble(ModelKind::LinearSvm, recipe, input_shape.to_vec(), t.stages, Vec::new())
}

/// Affine→ReLU hidden layers, affine output with Tanh, reshaped to
/// `output_shape`.
pub fn build_mlp_generator(noise_dim: usize, hidden: &[usize], output_shape: &[usize]) -> Result<ModelSpec> {
    check_positive("noise dimension", noise_dim)?;
    let out_dim: usize = output_shape.iter().product();
    if output_shape.is_empty() || out_dim == 0 || hidden.contains(&0) {
        return Err(Error::contract(format!("invalid mlp generator shape {hidden:?} → {output_shape:?}")));
    }
    let mut t = StageList::new("g");
    let mut n = noise_dim;
    for &h in hidden {
        t.layer(LayerConfig::Affine { in_features: n, out_features: h }).layer(LayerConfig::Relu);
        n = h;
    }
    t.layer(LayerConfig::Affine { in_features: n, out_features: out_dim }).layer(LayerConfig::Tanh);
    if output_shape.len() > 1 {
        t.layer(LayerConfig::Reshape { shape: output_shape.to_vec() });
    }
    let recipe = Recipe::MlpGenerator { noise_dim, hidden: hidden.to_vec(), output_shape: output_shape.to_vec() };
    ModelSpec::assemble(ModelKind::Generator, recipe, vec![noise_dim], t.stages, Vec::new())
}

/// Flatten, affine→LeakyReLU hidden layers, affine→Sigmoid output `[B, 1]`.
pub fn build_mlp_discriminator(input_shape: &[usize], hidden: &[usize]) -> Result<ModelSpec> {
    let in_dim: usize = input_shape.iter().product();
    if input_shape.is_empty() || in_dim == 0 || hidden.contains(&0) {
        return Err(Error::contract(format!("invalid mlp discriminator shape {input_shape:?} → {hidden:?}")));
    }
    let mut t = StageList::new("d");
    if input_shape.len() > 1 {
        t.layer(LayerConfig::Flatten);
    }
    let mut n = in_dim;
    for &h in hidden {
        t.layer(LayerConfig::Affine { in_features: n, out_features: h }).layer(LayerConfig::leaky_relu());
        n = h;
    }
    t.layer(LayerConfig::Affine { in_features: n, out_features: 1 }).layer(LayerConfig::Sigmoid);
    let recipe = Recipe::MlpDiscriminator { input_shape: input_shape.to_vec(), hidden: hidden.to_vec() };
    ModelSpec::assemble(ModelKind::Discriminator, recipe, input_shape.to_vec(), t.stages, Vec::new())
}
