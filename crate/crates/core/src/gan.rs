//! Adversarial objectives, the alternating training loop and equilibrium
//! diagnostics.

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::layers::bce_from_probability;
use crate::models::{ForwardMode, ModelSpec};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::params::ParamSet;
use crate::sampling::{rng_stream, sample_noise, BatchSampler, Stream};
use crate::tensor::Tensor;

/// Loss minimized by the discriminator:
/// `−[mean ln D(x) + mean ln(1 − D(G(z)))]`.
pub fn discriminator_objective(tape: &mut Tape, d_real: Var, d_fake: Var) -> Result<Var> {
    let ones = vec![1.0; tape.value(d_real).numel()];
    let zeros = vec![0.0; tape.value(d_fake).numel()];
    let real = bce_from_probability(tape, d_real, &ones)?;
    let fake = bce_from_probability(tape, d_fake, &zeros)?;
    tape.add(real, fake)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorLoss {
    /// `mean ln(1 − D(G(z)))`.
    Minimax,
    /// `−mean ln D(G(z))`.
    NonSaturating,
}

/// Loss minimized by the generator.
pub fn generator_objective(tape: &mut Tape, d_fake: Var, form: GeneratorLoss) -> Result<Var> {
    let n = tape.value(d_fake).numel();
    match form {
        GeneratorLoss::Minimax => {
            let fooled = bce_from_probability(tape, d_fake, &vec![0.0; n])?;
            tape.neg(fooled)
        }
        GeneratorLoss::NonSaturating => bce_from_probability(tape, d_fake, &vec![1.0; n]),
    }
}

/// Evaluates [`discriminator_objective`] on plain values.
pub fn discriminator_loss_value(d_real: &Tensor, d_fake: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let (r, f) = (tape.constant(d_real.clone())?, tape.constant(d_fake.clone())?);
    let loss = discriminator_objective(&mut tape, r, f)?;
    tape.value(loss).item()
}

/// Evaluates [`generator_objective`] on plain values.
pub fn generator_loss_value(d_fake: &Tensor, form: GeneratorLoss) -> Result<f64> {
    let mut tape = Tape::new();
    let f = tape.constant(d_fake.clone())?;
    let loss = generator_objective(&mut tape, f, form)?;
    tape.value(loss).item()
}

/// `V(D, G) = mean ln D(x) + mean ln(1 − D(G(z)))`, the negated
/// discriminator loss.
pub fn total_objective_value(d_real: &Tensor, d_fake: &Tensor) -> Result<f64> {
    Ok(-discriminator_loss_value(d_real, d_fake)?)
}

fn default_d_steps() -> usize {
    1
}

fn default_generator_loss() -> GeneratorLoss {
    GeneratorLoss::NonSaturating
}

fn default_optimizer() -> OptimizerConfig {
    OptimizerConfig::gan_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Length of the standard-normal noise vector.
    pub noise_dim: usize,
    /// Discriminator updates per generator update.
    #[serde(default = "default_d_steps")]
    pub d_steps: usize,
    pub batch_size: usize,
    pub steps: usize,
    #[serde(default = "default_generator_loss")]
    pub generator_loss: GeneratorLoss,
    pub seed: u64,
    #[serde(default = "default_optimizer")]
    pub g_optimizer: OptimizerConfig,
    #[serde(default = "default_optimizer")]
    pub d_optimizer: OptimizerConfig,
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.noise_dim == 0 {
            return Err(Error::contract("noise dimension must be at least 1"));
        }
        if self.d_steps == 0 {
            return Err(Error::contract("need at least one discriminator step per generator step"));
        }
        if self.batch_size < 2 {
            return Err(Error::contract(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        self.g_optimizer.validate()?;
        self.d_optimizer.validate()
    }
}

/// What happened during one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Discriminator loss of the last discriminator update in the step.
    pub d_loss: f64,
    pub g_loss: f64,
    /// Mean D(x) on the real batch of the last discriminator update.
    pub mean_d_real: f64,
    /// Mean D(G(z)) on the fake batch of the last discriminator update.
    pub mean_d_fake: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanDiagnostics {
    pub records: Vec<StepRecord>,
}

impl GanDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,d_loss,g_loss,mean_d_real,mean_d_fake\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.step, r.d_loss, r.g_loss, r.mean_d_real, r.mean_d_fake).expect("string write");
        }
        out
    }
}

/// Windowed summary of how close D's outputs are to 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub window: usize,
    pub mean_d_real: f64,
    pub std_d_real: f64,
    pub mean_d_fake: f64,
    pub std_d_fake: f64,
    /// `|mean D(x) − 0.5|`.
    pub distance_real: f64,
    /// `|mean D(G(z)) − 0.5|`.
    pub distance_fake: f64,
}

impl EquilibriumReport {
    /// Both means within `tolerance` of 0.5.
    pub fn within(&self, tolerance: f64) -> bool {
        self.distance_real <= tolerance && self.distance_fake <= tolerance
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Summarizes the last `window` records.
pub fn equilibrium_report(diag: &GanDiagnostics, window: usize) -> Result<EquilibriumReport> {
    if window == 0 || window > diag.records.len() {
        return Err(Error::contract(format!(
            "window of {window} over {} recorded steps",
            diag.records.len()
        )));
    }
    let tail = &diag.records[diag.records.len() - window..];
    let (mean_d_real, std_d_real) = mean_std(tail.iter().map(|r| r.mean_d_real));
    let (mean_d_fake, std_d_fake) = mean_std(tail.iter().map(|r| r.mean_d_fake));
    Ok(EquilibriumReport {
        window,
        mean_d_real,
        std_d_real,
        mean_d_fake,
        std_d_fake,
        distance_real: (mean_d_real - 0.5).abs(),
        distance_fake: (mean_d_fake - 0.5).abs(),
    })
}

/// Final parameters and the per-step history of a run.
#[derive(Debug, Clone)]
pub struct GanOutcome {
    pub g_params: ParamSet,
    pub d_params: ParamSet,
    pub diagnostics: GanDiagnostics,
}

fn mean_of(t: &Tensor) -> f64 {
    t.sum() / t.numel() as f64
}

fn diverged(step: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Numeric(reason) => Error::Diverged { step, reason },
        other => other,
    }
}

/// Alternating optimization of a generator and a discriminator.
///
/// Each step runs `d_steps` discriminator updates on a fresh real batch and a
/// fresh fake batch, then one generator update on fresh noise. The model not
/// being updated is bound as constants, so it receives no gradient.
pub struct GanTrainer<'a> {
    generator: &'a ModelSpec,
    discriminator: &'a ModelSpec,
    data: &'a LabeledDataset,
    config: GanConfig,
    g_params: ParamSet,
    d_params: ParamSet,
    g_opt: OptimizerState,
    d_opt: OptimizerState,
    sampler: BatchSampler,
    noise: ChaCha8Rng,
    diagnostics: GanDiagnostics,
}

impl<'a> GanTrainer<'a> {
    /// Checks shapes and initializes both models from the config seed
    /// (generator first).
    pub fn new(generator: &'a ModelSpec, discriminator: &'a ModelSpec, data: &'a LabeledDataset, config: GanConfig) -> Result<Self> {
        config.validate()?;
        if generator.input_shape() != [config.noise_dim] {
            return Err(Error::contract(format!(
                "generator takes {:?}, config noise dimension is {}",
                generator.input_shape(),
                config.noise_dim
            )));
        }
        let sample = data.sample_shape();
        if generator.output_shapes()[0] != sample || discriminator.input_shape() != sample {
            return Err(Error::contract(format!(
                "generator emits {:?}, discriminator takes {:?}, data samples are {:?}",
                generator.output_shapes()[0],
                discriminator.input_shape(),
                sample
            )));
        }
        if discriminator.output_shapes().last().map(Vec::as_slice) != Some(&[1][..]) {
            return Err(Error::contract("discriminator must emit one probability per sample"));
        }
        let mut init = rng_stream(config.seed, Stream::Init);
        let g_params = generator.init_params(&mut init)?;
        let d_params = discriminator.init_params(&mut init)?;
        Self::with_params(generator, discriminator, data, config, g_params, d_params)
    }

    /// Starts from given parameters.
    pub fn with_params(
        generator: &'a ModelSpec,
        discriminator: &'a ModelSpec,
        data: &'a LabeledDataset,
        config: GanConfig,
        g_params: ParamSet,
        d_params: ParamSet,
    ) -> Result<Self> {
        config.validate()?;
        generator.check_params(&g_params)?;
        discriminator.check_params(&d_params)?;
        let sampler = BatchSampler::new(data.len(), config.batch_size, rng_stream(config.seed, Stream::Data))?;
        Ok(GanTrainer {
            generator,
            discriminator,
            data,
            g_opt: OptimizerState::new(config.g_optimizer, &g_params)?,
            d_opt: OptimizerState::new(config.d_optimizer, &d_params)?,
            noise: rng_stream(config.seed, Stream::Noise),
            config,
            g_params,
            d_params,
            sampler,
            diagnostics: GanDiagnostics::default(),
        })
    }

    pub fn g_params(&self) -> &ParamSet {
        &self.g_params
    }

    pub fn d_params(&self) -> &ParamSet {
        &self.d_params
    }

    pub fn diagnostics(&self) -> &GanDiagnostics {
        &self.diagnostics
    }

    /// One discriminator update. Returns (loss, mean D(x), mean D(G(z))).
    pub fn d_step(&mut self) -> Result<(f64, f64, f64)> {
        let batch = self.config.batch_size;
        let (real, _) = self.data.batch(&self.sampler.next_batch())?;
        let z = sample_noise(self.config.noise_dim, batch, &mut self.noise);

        let mut tape = Tape::new();
        let gb = self.g_params.bind(&mut tape, false)?;
        let db = self.d_params.bind(&mut tape, true)?;
        let zv = tape.constant(z)?;
        let fake = self.generator.forward(&self.g_params, &gb, &mut tape, zv, ForwardMode::Train)?.output();
        let fake = tape.detach(fake)?;
        let xv = tape.constant(real)?;
        let on_real = self.discriminator.forward(&self.d_params, &db, &mut tape, xv, ForwardMode::Train)?;
        let on_fake = self.discriminator.forward(&self.d_params, &db, &mut tape, fake, ForwardMode::Train)?;
        let (d_real, d_fake) = (*on_real.outputs.last().expect("one head"), *on_fake.outputs.last().expect("one head"));
        let loss = discriminator_objective(&mut tape, d_real, d_fake)?;
        let grads = tape.backward(loss)?;
        self.d_opt.step(&mut self.d_params, &db.collect(&grads))?;
        ModelSpec::apply_stats(&mut self.d_params, on_real.stats)?;
        ModelSpec::apply_stats(&mut self.d_params, on_fake.stats)?;
        Ok((tape.value(loss).item()?, mean_of(tape.value(d_real)), mean_of(tape.value(d_fake))))
    }

    /// One generator update on fresh noise. Returns the generator loss.
    pub fn g_step(&mut self) -> Result<f64> {
        let z = sample_noise(self.config.noise_dim, self.config.batch_size, &mut self.noise);
        let mut tape = Tape::new();
        let gb = self.g_params.bind(&mut tape, true)?;
        let db = self.d_params.bind(&mut tape, false)?;
        let zv = tape.constant(z)?;
        let gen = self.generator.forward(&self.g_params, &gb, &mut tape, zv, ForwardMode::Train)?;
        let judged = self.discriminator.forward(&self.d_params, &db, &mut tape, gen.output(), ForwardMode::Train)?;
        let loss = generator_objective(&mut tape, *judged.outputs.last().expect("one head"), self.config.generator_loss)?;
        let grads = tape.backward(loss)?;
        self.g_opt.step(&mut self.g_params, &gb.collect(&grads))?;
        ModelSpec::apply_stats(&mut self.g_params, gen.stats)?;
        tape.value(loss).item()
    }

    /// One full step. Numeric failures become [`Error::Diverged`] carrying
    /// the step index.
    pub fn step(&mut self) -> Result<StepRecord> {
        let step = self.diagnostics.records.len();
        let mut last = (0.0, 0.0, 0.0);
        for _ in 0..self.config.d_steps {
            last = self.d_step().map_err(diverged(step))?;
        }
        let g_loss = self.g_step().map_err(diverged(step))?;
        let record = StepRecord { step, d_loss: last.0, g_loss, mean_d_real: last.1, mean_d_fake: last.2 };
        self.diagnostics.records.push(record);
        Ok(record)
    }

    pub fn run(mut self) -> Result<GanOutcome> {
        for _ in 0..self.config.steps {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> GanOutcome {
        GanOutcome { g_params: self.g_params, d_params: self.d_params, diagnostics: self.diagnostics }
    }
}

/// Initializes and trains both models for `config.steps` steps.
pub fn train_gan(generator: &ModelSpec, discriminator: &ModelSpec, data: &LabeledDataset, config: &GanConfig) -> Result<GanOutcome> {
    GanTrainer::new(generator, discriminator, data, config.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec())
    }

    #[test]
    fn objective_reference_points() {
        assert_eq!(discriminator_loss_value(&t(&[1.0]), &t(&[0.0])).unwrap(), 0.0);
        assert!((discriminator_loss_value(&t(&[0.5]), &t(&[0.5])).unwrap() - 2.0 * LN_2).abs() < 1e-12);
        assert!((total_objective_value(&t(&[0.5]), &t(&[0.5])).unwrap() + 2.0 * LN_2).abs() < 1e-12);
        assert!((generator_loss_value(&t(&[0.5]), GeneratorLoss::Minimax).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        let fooled = generator_loss_value(&t(&[1.0 - 1e-7]), GeneratorLoss::NonSaturating).unwrap();
        assert!(fooled > 0.0 && fooled < 1.01e-7);
    }

    #[test]
    fn high_precision_discriminator_case() {
        // −[(ln .9 + ln .8)/2 + (ln .9 + ln .8)/2]
        let expected = -((0.9f64).ln() + (0.8f64).ln());
        let got = discriminator_loss_value(&t(&[0.9, 0.8]), &t(&[0.1, 0.2])).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_report_hand_history() {
        let records = [(0.4, 0.7), (0.5, 0.5), (0.9, 0.3)]
            .iter()
            .enumerate()
            .map(|(i, &(r, f))| StepRecord { step: i, d_loss: 0.0, g_loss: 0.0, mean_d_real: r, mean_d_fake: f })
            .collect();
        let diag = GanDiagnostics { records };
        let rep = equilibrium_report(&diag, 3).unwrap();
        assert!((rep.mean_d_real - 0.6).abs() < 1e-15);
        assert!((rep.mean_d_fake - 0.5).abs() < 1e-15);
        assert!((rep.distance_real - 0.1).abs() < 1e-15);
        let last = equilibrium_report(&diag, 1).unwrap();
        assert_eq!((last.mean_d_real, last.std_d_real), (0.9, 0.0));
        assert!(equilibrium_report(&diag, 0).is_err());
        assert!(equilibrium_report(&diag, 4).is_err());
    }

    #[test]
    fn csv_header() {
        let csv = GanDiagnostics::default().to_csv();
        assert_eq!(csv, "step,d_loss,g_loss,mean_d_real,mean_d_fake\n");
    }
}
