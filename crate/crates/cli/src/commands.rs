//! The six verbs of the `gancmp` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gancmp::data::{export_images, DataPart, LabeledDataset};
use gancmp::gan::{equilibrium_report, GanTrainer};
use gancmp::metrics::EvalReport;
use gancmp::models::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind, ModelSpec};
use gancmp::params::ParamSet;
use gancmp::sampling::{rng_stream, sample_noise, Stream};
use gancmp::train::{predict_logits, train_classifier, train_gan_classifier, TrainHistory};
use gancmp::Tensor;

use crate::config::{load_config, DatasetName, ExperimentConfig, LoadedConfig, ModelChoice};
use crate::datasets::{expected_files, load_raw, part_tag, verify_checksums, DataSource, CHECKSUM_FILE};
use crate::error::{CliError, CliResult};
use crate::manifest::{ManifestBuilder, RunManifest};
use crate::plot::{dominance_lines, roc_csv, roc_svg, unique_ids, Curve};
use crate::report::{comparison_table, read_report};

#[derive(Debug, Parser)]
#[command(name = "gancmp", version, about = "Train and compare GAN-based and baseline image classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify checksums and parse a dataset directory.
    Prepare(PrepareArgs),
    /// Train the model described by a config file.
    Train(TrainArgs),
    /// Evaluate a classifier checkpoint and write a JSON report plus ROC CSV.
    Eval(EvalArgs),
    /// Render evaluation reports as a markdown table.
    Compare(CompareArgs),
    /// Write ROC curves from evaluation reports as CSV and/or SVG.
    Roc(RocArgs),
    /// Sample images from a generator checkpoint.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, value_enum)]
    pub dataset: DatasetName,
    /// Directory holding the dataset files.
    #[arg(long)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for DataPart {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => DataPart::Train,
            SplitArg::Test => DataPart::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset to evaluate on; defaults to the one the checkpoint was trained on.
    #[arg(long, value_enum)]
    pub dataset: Option<DatasetName>,
    /// Dataset directory; defaults to the training config's `data_dir`, taken
    /// relative to the working directory.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
    /// ROC CSV path; defaults to the report path with a `.roc.csv` extension.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    /// Markdown output; the table is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub reports: Vec<PathBuf>,
    /// `.csv` or `.svg`; may be repeated.
    #[arg(long, num_args = 1.., required = true)]
    pub out: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one command, returning the lines to print on success.
pub fn run(command: &Command) -> CliResult<Vec<String>> {
    match command {
        Command::Prepare(a) => prepare(a).map(|s| s.lines),
        Command::Train(a) => train(a).map(|s| s.lines),
        Command::Eval(a) => eval(a).map(|(r, out)| {
            vec![format!(
                "{} on {} {}: accuracy {:.4}, macro F1 {:.4}, macro AUC {:.4} → {}",
                r.model,
                r.dataset,
                r.split,
                r.accuracy,
                r.f1,
                r.macro_auc,
                out.display()
            )]
        }),
        Command::Compare(a) => compare(a).map(|t| vec![t.trim_end().to_string()]),
        Command::Roc(a) => roc(a),
        Command::Generate(a) => generate(a).map(|paths| vec![format!("wrote {} images", paths.len())]),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

#[derive(Debug, Clone)]
pub struct PrepareStatus {
    pub train: usize,
    pub test: usize,
    pub verified: Vec<String>,
    pub lines: Vec<String>,
}

pub fn prepare(args: &PrepareArgs) -> CliResult<PrepareStatus> {
    if args.dataset == DatasetName::Toy {
        let line = "ok, toy ring is generated from the config seed; no files to check".to_string();
        return Ok(PrepareStatus { train: 0, test: 0, verified: Vec::new(), lines: vec![line] });
    }
    let dir = args.dir.as_deref().ok_or_else(|| CliError::Usage("--dir is required for image datasets".into()))?;
    if !dir.is_dir() {
        return Err(CliError::Missing(dir.to_path_buf()));
    }
    let mut lines = Vec::new();
    let verified = if dir.join(CHECKSUM_FILE).is_file() {
        let v = verify_checksums(dir)?;
        lines.push(format!("checksums: {} files match {CHECKSUM_FILE}", v.len()));
        v
    } else {
        lines.push(format!("checksums: no {CHECKSUM_FILE} in {}, not verified", dir.display()));
        Vec::new()
    };
    let train = load_raw(args.dataset, dir, DataPart::Train)?;
    let test = load_raw(args.dataset, dir, DataPart::Test)?;
    let [c, h, w] = train.sample_shape;
    lines.push(format!(
        "shapes: {c}×{h}×{w}, {} classes (files: {})",
        train.classes,
        expected_files(args.dataset).join(", ")
    ));
    lines.push(format!("ok, {} train / {} test", train.len(), test.len()));
    Ok(PrepareStatus { train: train.len(), test: test.len(), verified, lines })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub lines: Vec<String>,
}

pub fn data_source(loaded: &LoadedConfig) -> DataSource {
    let c = &loaded.config;
    DataSource {
        dataset: c.dataset,
        dir: loaded.data_dir(),
        per_class_cap: c.per_class_cap,
        test_per_class_cap: c.test_per_class_cap,
        seed: c.data_seed(),
        toy: c.toy.clone(),
    }
}

fn note_divergence(e: CliError) -> CliError {
    if let CliError::Core(gancmp::Error::Diverged { step, .. }) = &e {
        match step.checked_sub(1) {
            Some(good) => eprintln!("training stopped: last good step {good}"),
            None => eprintln!("training stopped before any step completed"),
        }
    }
    e
}

fn save(manifest: &mut ManifestBuilder, name: &str, model: &ModelSpec, params: &ParamSet, echo: &serde_json::Value) -> CliResult<()> {
    save_checkpoint(&manifest.dir().join(name), &Checkpoint::new(model, params, echo.clone())?)?;
    manifest.record(name);
    Ok(())
}

fn history_files(manifest: &mut ManifestBuilder, history: &TrainHistory) -> CliResult<()> {
    let mut csv = String::from("step,loss\n");
    for (i, l) in history.losses.iter().enumerate() {
        writeln!(csv, "{i},{l}").expect("string write");
    }
    manifest.write("history.csv", csv)?;
    let mut csv = String::from("epoch,mean_loss\n");
    for (i, l) in history.epoch_losses.iter().enumerate() {
        writeln!(csv, "{i},{l}").expect("string write");
    }
    manifest.write("epochs.csv", csv)?;
    Ok(())
}

/// Trains per config. Models and hyperparameters are validated before any
/// data is read, so contract violations fail fast.
pub fn train(args: &TrainArgs) -> CliResult<TrainSummary> {
    let loaded = load_config(&args.config)?;
    let cfg = &loaded.config;
    // the echo carries the data directory as seen from the working directory,
    // which is where `eval` looks when no --dir is given
    let echo = serde_json::to_value(ExperimentConfig { data_dir: loaded.data_dir(), ..cfg.clone() }).expect("config serializes");
    let out_dir = loaded.output_dir(args.out_dir.as_deref());
    let source = data_source(&loaded);
    let mut lines = Vec::new();
    let mut manifest = ManifestBuilder::start("train", echo.clone(), &out_dir);
    match cfg.model {
        ModelChoice::Svm | ModelChoice::Cnn | ModelChoice::Resnet => {
            let model = cfg.classifier()?;
            let ccfg = cfg.classifier_config(&model);
            ccfg.validate(&model)?;
            let data = source.load(DataPart::Train)?;
            create_dir(&out_dir)?;
            let (params, history) = train_classifier(&model, &data, &ccfg).map_err(|e| note_divergence(e.into()))?;
            save(&mut manifest, "model.ckpt", &model, &params, &echo)?;
            history_files(&mut manifest, &history)?;
            lines.push(format!(
                "{}: {} epochs on {} samples, final epoch loss {:.4}",
                cfg.name,
                cfg.epochs,
                data.len(),
                history.epoch_losses.last().copied().unwrap_or(f64::NAN)
            ));
        }
        ModelChoice::Cgan => {
            let model = cfg.classifier()?;
            let generator = cfg.generator()?;
            let ccfg = cfg.classifier_config(&model);
            ccfg.validate(&model)?;
            let adv = cfg.adversarial_config()?;
            let data = source.load(DataPart::Train)?;
            create_dir(&out_dir)?;
            let out = train_gan_classifier(&model, &generator, &data, &ccfg, &adv).map_err(|e| note_divergence(e.into()))?;
            save(&mut manifest, "model.ckpt", &model, &out.params, &echo)?;
            save(&mut manifest, "generator.ckpt", &generator, &out.g_params, &echo)?;
            let mut csv = String::from("step,class_loss,adv_loss,g_loss\n");
            for i in 0..out.history.losses.len() {
                writeln!(csv, "{i},{},{},{}", out.history.losses[i], out.adv_losses[i], out.g_losses[i]).expect("string write");
            }
            manifest.write("history.csv", csv)?;
            lines.push(format!(
                "{}: {} epochs on {} samples, final class loss {:.4}",
                cfg.name,
                cfg.epochs,
                data.len(),
                out.history.epoch_losses.last().copied().unwrap_or(f64::NAN)
            ));
        }
        ModelChoice::GanRaw => {
            let generator = cfg.generator()?;
            let discriminator = cfg.discriminator()?;
            let gcfg = cfg.gan_config()?;
            gcfg.validate()?;
            let window = cfg.gan()?.window;
            if window == 0 || window > gcfg.steps {
                return Err(CliError::Usage(format!("window {window} does not fit {} steps", gcfg.steps)));
            }
            let data = source.load(DataPart::Train)?;
            let mut trainer = GanTrainer::new(&generator, &discriminator, &data, gcfg.clone())?;
            create_dir(&out_dir)?;
            for _ in 0..gcfg.steps {
                if let Err(e) = trainer.step() {
                    manifest.write("diagnostics.csv", trainer.diagnostics().to_csv())?;
                    manifest.finish()?;
                    return Err(note_divergence(e.into()));
                }
            }
            let outcome = trainer.finish();
            save(&mut manifest, "generator.ckpt", &generator, &outcome.g_params, &echo)?;
            save(&mut manifest, "discriminator.ckpt", &discriminator, &outcome.d_params, &echo)?;
            manifest.write("diagnostics.csv", outcome.diagnostics.to_csv())?;
            let eq = equilibrium_report(&outcome.diagnostics, window)?;
            manifest.write("equilibrium.json", serde_json::to_string_pretty(&eq).expect("report serializes") + "\n")?;
            lines.push(format!(
                "{}: {} steps; last {window} steps mean D(x) {:.3}, mean D(G(z)) {:.3}",
                cfg.name, gcfg.steps, eq.mean_d_real, eq.mean_d_fake
            ));
        }
    }
    let manifest = manifest.finish()?;
    lines.push(format!("wrote {} artifacts to {}", manifest.artifacts.len(), out_dir.display()));
    Ok(TrainSummary { out_dir, manifest, lines })
}

fn restore(path: &Path) -> CliResult<(Checkpoint, ModelSpec, ParamSet)> {
    if !path.is_file() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    let ckpt = load_checkpoint(path)?;
    let (model, params) = ckpt.restore()?;
    Ok((ckpt, model, params))
}

fn experiment_of(ckpt: &Checkpoint) -> CliResult<ExperimentConfig> {
    serde_json::from_value(ckpt.experiment().clone())
        .map_err(|e| gancmp::Error::Format(format!("checkpoint config echo: {e}")).into())
}

fn check_compatible(model: &ModelSpec, data: &LabeledDataset) -> CliResult<()> {
    if model.input_shape() != data.sample_shape() || model.output_shapes()[0] != [data.classes()] {
        return Err(gancmp::Error::Dimension(format!(
            "model maps {:?} → {:?}, dataset `{}` has samples {:?} and {} classes",
            model.input_shape(),
            model.output_shapes()[0],
            data.name(),
            data.sample_shape(),
            data.classes()
        ))
        .into());
    }
    Ok(())
}

/// Evaluates a classifier checkpoint. Returns the report and where it went.
pub fn eval(args: &EvalArgs) -> CliResult<(EvalReport, PathBuf)> {
    let (ckpt, model, params) = restore(&args.checkpoint)?;
    if !ckpt.kind.is_classifier() {
        return Err(CliError::Usage(format!("eval needs a classifier checkpoint, got `{}`", ckpt.kind.tag())));
    }
    let cfg = experiment_of(&ckpt)?;
    let part = DataPart::from(args.split);
    let source = DataSource {
        dataset: args.dataset.unwrap_or(cfg.dataset),
        dir: args.dir.clone().or_else(|| cfg.data_dir.clone()),
        per_class_cap: cfg.per_class_cap,
        test_per_class_cap: cfg.test_per_class_cap,
        seed: cfg.data_seed(),
        toy: cfg.toy.clone(),
    };
    let data = source.load(part)?;
    check_compatible(&model, &data)?;
    let logits = predict_logits(&model, &params, data.images(), cfg.eval_batch)?;
    let report = EvalReport::from_logits(
        cfg.label(),
        source.dataset.tag(),
        part_tag(part),
        &logits,
        data.labels(),
        cfg.roc_class,
        cfg.seed,
        ckpt.experiment().clone(),
    )?;
    write_file(&args.out, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
    let roc_path = args.roc_out.clone().unwrap_or_else(|| args.out.with_extension("roc.csv"));
    let curve = Curve { id: report.model.clone(), auc: report.auc, points: report.roc.clone() };
    write_file(&roc_path, roc_csv(&[curve]))?;
    Ok((report, args.out.clone()))
}

pub fn compare(args: &CompareArgs) -> CliResult<String> {
    let reports = args.reports.iter().map(|p| read_report(p)).collect::<CliResult<Vec<_>>>()?;
    let table = comparison_table(&reports);
    if let Some(out) = &args.out {
        write_file(out, &table)?;
    }
    Ok(table)
}

/// Writes the requested ROC artifacts; returns the dominance summary lines.
pub fn roc(args: &RocArgs) -> CliResult<Vec<String>> {
    for out in &args.out {
        if !matches!(out.extension().and_then(|e| e.to_str()), Some("csv" | "svg")) {
            return Err(CliError::Usage(format!("{}: ROC output must end in .csv or .svg", out.display())));
        }
    }
    let reports = args.reports.iter().map(|p| read_report(p)).collect::<CliResult<Vec<_>>>()?;
    let ids = unique_ids(&reports.iter().map(|r| r.model.clone()).collect::<Vec<_>>());
    let curves: Vec<Curve> = reports
        .into_iter()
        .zip(ids)
        .map(|(r, id)| {
            if r.roc.is_empty() {
                Err(CliError::Report { path: PathBuf::from(&id), reason: "no ROC points".into() })
            } else {
                Ok(Curve { id, auc: r.auc, points: r.roc })
            }
        })
        .collect::<CliResult<_>>()?;
    for out in &args.out {
        let body = if out.extension().is_some_and(|e| e == "csv") { roc_csv(&curves) } else { roc_svg(&curves) };
        write_file(out, body)?;
    }
    let mut lines = dominance_lines(&curves);
    lines.push(format!("wrote {} curves", curves.len()));
    Ok(lines)
}

/// Samples `count` images from a generator checkpoint with its own noise seed.
pub fn generate(args: &GenerateArgs) -> CliResult<Vec<PathBuf>> {
    let (ckpt, model, params) = restore(&args.checkpoint)?;
    if ckpt.kind != ModelKind::Generator {
        return Err(CliError::Usage(format!("generate needs a generator checkpoint, got `{}`", ckpt.kind.tag())));
    }
    let noise_dim = model.input_shape()[0];
    let z = sample_noise(noise_dim, args.count, &mut rng_stream(args.seed, Stream::Noise));
    let flat = predict_logits(&model, &params, &z, 100)?;
    let mut shape = vec![args.count];
    shape.extend_from_slice(&model.output_shapes()[0]);
    let images = Tensor::new(&shape, flat.data().to_vec())?;
    Ok(export_images(&images, &args.out)?)
}
