//! Supervised training loops for the classifier models.

use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::gan::{discriminator_objective, generator_objective, GeneratorLoss};
use crate::layers::{hinge_loss, softmax_cross_entropy};
use crate::models::{ForwardMode, ModelKind, ModelSpec};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::params::{Binding, ParamSet};
use crate::sampling::{rng_stream, sample_noise, BatchSampler, Stream};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierLoss {
    CrossEntropy,
    /// Multi-class hinge plus `l2 · Σ‖w‖²` over every `*.weight` tensor.
    Hinge { margin: f64, l2: f64 },
}

impl ClassifierLoss {
    /// Hinge for the linear SVM, cross-entropy for everything else.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::LinearSvm => ClassifierLoss::Hinge { margin: 1.0, l2: 1e-4 },
            _ => ClassifierLoss::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub loss: ClassifierLoss,
}

impl ClassifierConfig {
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be at least 1"));
        }
        let has_bn = model.layer_kinds().contains(&crate::layers::LayerKind::Batchnorm);
        if has_bn && self.batch_size < 2 {
            return Err(Error::contract(format!(
                "batch size {} is too small for a model with batchnorm",
                self.batch_size
            )));
        }
        if let ClassifierLoss::Hinge { margin, l2 } = self.loss {
            if !(margin > 0.0) || !(l2 >= 0.0) {
                return Err(Error::contract(format!("hinge needs margin > 0 and l2 ≥ 0, got {margin} and {l2}")));
            }
        }
        Ok(())
    }
}

/// Per-step training losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Classification loss (without the weight penalty) of every step.
    pub losses: Vec<f64>,
    /// Mean of `losses` over each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainHistory {
    fn close_epoch(&mut self, steps: usize) {
        let tail = &self.losses[self.losses.len() - steps..];
        self.epoch_losses.push(tail.iter().sum::<f64>() / steps.max(1) as f64);
    }
}

fn check_classifier(model: &ModelSpec, data: &LabeledDataset) -> Result<usize> {
    if !model.kind().is_classifier() {
        return Err(Error::contract(format!("`{}` is not a classifier", model.kind().tag())));
    }
    if model.input_shape() != data.sample_shape() {
        return Err(Error::dim(format!(
                "model takes {:?}, data samples are {:?}",
                model.input_shape(),
                data.sample_shape()
            )));
    }
    let classes = model.output_shapes()[0][0];
    if classes != data.classes() {
        return Err(Error::dim(format!("model has {classes} outputs, data has {} classes", data.classes())));
    }
    Ok(classes)
}

fn classification_loss(tape: &mut Tape, binding: &Binding, params: &ParamSet, logits: Var, labels: &[usize], loss: ClassifierLoss) -> Result<(Var, Var)> {
    match loss {
        ClassifierLoss::CrossEntropy => {
            let l = softmax_cross_entropy(tape, logits, labels)?;
            Ok((l, l))
        }
        ClassifierLoss::Hinge { margin, l2 } => {
            let data_loss = hinge_loss(tape, logits, labels, margin)?;
            let mut total = data_loss;
            for p in params.iter().filter(|p| p.trainable && p.name.ends_with(".weight")) {
                let w = binding.var(&p.name)?;
                let sq = tape.square(w)?;
                let s = tape.sum_all(sq)?;
                let penalty = tape.scale(s, l2)?;
                total = tape.add(total, penalty)?;
            }
            Ok((total, data_loss))
        }
    }
}

fn diverged(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Numeric(reason) => Error::Diverged { step, reason },
        other => other,
    }
}

/// Minibatch training of a classifier's first head.
pub fn train_classifier(model: &ModelSpec, data: &LabeledDataset, config: &ClassifierConfig) -> Result<(ParamSet, TrainHistory)> {
    let params = model.init_params(&mut rng_stream(config.seed, Stream::Init))?;
    train_classifier_from(model, data, config, params)
}

/// [`train_classifier`] starting from given parameters.
pub fn train_classifier_from(
    model: &ModelSpec,
    data: &LabeledDataset,
    config: &ClassifierConfig,
    mut params: ParamSet,
) -> Result<(ParamSet, TrainHistory)> {
    config.validate(model)?;
    check_classifier(model, data)?;
    model.check_params(&params)?;
    let mut opt = OptimizerState::new(config.optimizer, &params)?;
    let mut sampler = BatchSampler::new(data.len(), config.batch_size, rng_stream(config.seed, Stream::Data))?;
    let mut history = TrainHistory::default();
    let per_epoch = sampler.batches_per_pass();
    for _ in 0..config.epochs {
        for _ in 0..per_epoch {
            let step = history.losses.len();
            let (x, labels) = data.batch(&sampler.next_batch())?;
            let run = || -> Result<f64> {
                let mut tape = Tape::new();
                let binding = params.bind(&mut tape, true)?;
                let xv = tape.constant(x)?;
                let out = model.forward(&params, &binding, &mut tape, xv, ForwardMode::Train)?;
                let (total, data_loss) = classification_loss(&mut tape, &binding, &params, out.output(), &labels, config.loss)?;
                let grads = tape.backward(total)?;
                opt.step(&mut params, &binding.collect(&grads))?;
                ModelSpec::apply_stats(&mut params, out.stats)?;
                tape.value(data_loss).item()
            };
            history.losses.push(run().map_err(diverged(step))?);
        }
        history.close_epoch(per_epoch);
    }
    Ok((params, history))
}

/// Settings for the adversarial part of GAN-classifier training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    /// Weight of the real/fake loss relative to the class loss.
    pub adv_weight: f64,
    pub noise_dim: usize,
    pub generator_loss: GeneratorLoss,
    pub g_optimizer: OptimizerConfig,
}

/// Result of GAN-classifier training.
#[derive(Debug, Clone)]
pub struct GanClassifierOutcome {
    pub params: ParamSet,
    pub g_params: ParamSet,
    /// Class loss per step; matches [`train_classifier`] when `adv_weight` is 0.
    pub history: TrainHistory,
    /// Real/fake discriminator loss per step.
    pub adv_losses: Vec<f64>,
    pub g_losses: Vec<f64>,
}

/// Joint training of a two-headed GAN classifier with a generator.
///
/// Each step updates the classifier on `class_loss + adv_weight · d_loss`
/// over a labelled real batch and a fake batch, then updates the generator
/// against the real/fake head. Classifier parameters are drawn before the
/// generator's, from the same stream [`train_classifier`] uses.
pub fn train_gan_classifier(
    model: &ModelSpec,
    generator: &ModelSpec,
    data: &LabeledDataset,
    config: &ClassifierConfig,
    adversarial: &AdversarialConfig,
) -> Result<GanClassifierOutcome> {
    config.validate(model)?;
    check_classifier(model, data)?;
    if model.kind() != ModelKind::GanClassifier {
        return Err(Error::contract(format!("expected a gan-classifier, got `{}`", model.kind().tag())));
    }
    if !(adversarial.adv_weight >= 0.0) {
        return Err(Error::contract(format!("adversarial weight must be ≥ 0, got {}", adversarial.adv_weight)));
    }
    if generator.input_shape() != [adversarial.noise_dim] || generator.output_shapes()[0] != data.sample_shape() {
        return Err(Error::contract(format!(
            "generator maps {:?} → {:?}; need [{}] → {:?}",
            generator.input_shape(),
            generator.output_shapes()[0],
            adversarial.noise_dim,
            data.sample_shape()
        )));
    }
    let mut init = rng_stream(config.seed, Stream::Init);
    let mut params = model.init_params(&mut init)?;
    let mut g_params = generator.init_params(&mut init)?;
    let mut opt = OptimizerState::new(config.optimizer, &params)?;
    let mut g_opt = OptimizerState::new(adversarial.g_optimizer, &g_params)?;
    let mut sampler = BatchSampler::new(data.len(), config.batch_size, rng_stream(config.seed, Stream::Data))?;
    let mut noise = rng_stream(config.seed, Stream::Noise);
    let mut out = GanClassifierOutcome {
        params: ParamSet::new(),
        g_params: ParamSet::new(),
        history: TrainHistory::default(),
        adv_losses: Vec::new(),
        g_losses: Vec::new(),
    };
    let per_epoch = sampler.batches_per_pass();
    let batch = config.batch_size;
    for _ in 0..config.epochs {
        for _ in 0..per_epoch {
            let step = out.history.losses.len();
            let (x, labels) = data.batch(&sampler.next_batch())?;
            let z = sample_noise(adversarial.noise_dim, batch, &mut noise);
            let d_update = || -> Result<(f64, f64)> {
                let mut tape = Tape::new();
                let gb = g_params.bind(&mut tape, false)?;
                let db = params.bind(&mut tape, true)?;
                let zv = tape.constant(z)?;
                let fake = generator.forward(&g_params, &gb, &mut tape, zv, ForwardMode::Train)?.output();
                let xv = tape.constant(x)?;
                let real = model.forward(&params, &db, &mut tape, xv, ForwardMode::Train)?;
                let on_fake = model.forward(&params, &db, &mut tape, fake, ForwardMode::Train)?;
                let (total, class_loss) = classification_loss(&mut tape, &db, &params, real.outputs[0], &labels, config.loss)?;
                let d_loss = discriminator_objective(&mut tape, real.outputs[1], on_fake.outputs[1])?;
                let weighted = tape.scale(d_loss, adversarial.adv_weight)?;
                let loss = tape.add(total, weighted)?;
                let grads = tape.backward(loss)?;
                opt.step(&mut params, &db.collect(&grads))?;
                ModelSpec::apply_stats(&mut params, real.stats)?;
                Ok((tape.value(class_loss).item()?, tape.value(d_loss).item()?))
            };
            let (class_loss, adv_loss) = d_update().map_err(diverged(step))?;
            let z = sample_noise(adversarial.noise_dim, batch, &mut noise);
            let g_update = || -> Result<f64> {
                let mut tape = Tape::new();
                let gb = g_params.bind(&mut tape, true)?;
                let db = params.bind(&mut tape, false)?;
                let zv = tape.constant(z)?;
                let gen = generator.forward(&g_params, &gb, &mut tape, zv, ForwardMode::Train)?;
                let judged = model.forward(&params, &db, &mut tape, gen.output(), ForwardMode::Train)?;
                let loss = generator_objective(&mut tape, judged.outputs[1], adversarial.generator_loss)?;
                let grads = tape.backward(loss)?;
                g_opt.step(&mut g_params, &gb.collect(&grads))?;
                ModelSpec::apply_stats(&mut g_params, gen.stats)?;
                tape.value(loss).item()
            };
            let g_loss = g_update().map_err(diverged(step))?;
            out.history.losses.push(class_loss);
            out.adv_losses.push(adv_loss);
            out.g_losses.push(g_loss);
        }
        out.history.close_epoch(per_epoch);
    }
    out.params = params;
    out.g_params = g_params;
    Ok(out)
}

/// First-head outputs in eval mode, computed `batch` samples at a time.
pub fn predict_logits(model: &ModelSpec, params: &ParamSet, images: &Tensor, batch: usize) -> Result<Tensor> {
    let n = images.shape().first().copied().unwrap_or(0);
    let width: usize = model.output_shapes()[0].iter().product();
    let mut data = Vec::with_capacity(n * width);
    for start in (0..n).step_by(batch.max(1)) {
        let chunk = images.slice_rows(start, (start + batch.max(1)).min(n))?;
        let out = model.predict(params, &chunk, ForwardMode::Eval)?;
        data.extend_from_slice(out[0].data());
    }
    Tensor::new(&[n, width], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_linear_svm;

    fn separable() -> LabeledDataset {
        // two clusters on either side of the line x = y
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            pts.extend_from_slice(&[0.2 + 0.5 * t, -0.3 - 0.4 * t]);
            labels.push(0);
            pts.extend_from_slice(&[-0.6 + 0.3 * t, 0.4 + 0.5 * t]);
            labels.push(1);
        }
        LabeledDataset::new(Tensor::new(&[40, 2], pts).unwrap().reshape(&[40, 1, 1, 2]).unwrap(), labels, 2, "sep").unwrap()
    }

    #[test]
    fn svm_separates_separable_data() {
        let data = separable();
        let model = build_linear_svm(&[1, 1, 2], 2).unwrap();
        let cfg = ClassifierConfig {
            epochs: 50,
            batch_size: 8,
            seed: 1,
            optimizer: OptimizerConfig::Sgd { learning_rate: 0.1 },
            loss: ClassifierLoss::Hinge { margin: 1.0, l2: 1e-4 },
        };
        let (params, history) = train_classifier(&model, &data, &cfg).unwrap();
        let logits = predict_logits(&model, &params, data.images(), 16).unwrap();
        let pred = crate::metrics::argmax_rows(&logits).unwrap();
        assert_eq!(pred, data.labels());
        assert_eq!(history.epoch_losses.len(), 50);
    }

    #[test]
    fn batchnorm_model_rejects_batch_of_one() {
        let model = crate::models::build_cnn(1, 4, 2, [2, 2], 4).unwrap();
        let cfg = ClassifierConfig {
            epochs: 1,
            batch_size: 1,
            seed: 0,
            optimizer: OptimizerConfig::baseline_default(),
            loss: ClassifierLoss::CrossEntropy,
        };
        assert!(cfg.validate(&model).is_ok());
        let res = crate::models::build_resnet(1, 8, 2, 1, 2).unwrap();
        assert!(matches!(cfg.validate(&res), Err(Error::Contract(_))));
    }
}
