//! Experiment configuration files.
//!
//! A config is a single JSON object. Relative paths inside it resolve
//! against the directory holding the file. Unknown fields are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use gancmp::gan::{GanConfig, GeneratorLoss};
use gancmp::models::{ModelKind, ModelSpec, Recipe, DEFAULT_INIT_STD};
use gancmp::optim::OptimizerConfig;
use gancmp::train::{AdversarialConfig, ClassifierConfig, ClassifierLoss};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    Mnist,
    Cifar10,
    Toy,
}

impl DatasetName {
    pub fn tag(self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::Cifar10 => "cifar10",
            DatasetName::Toy => "toy",
        }
    }
}

/// What `train` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Svm,
    Cnn,
    Resnet,
    /// Two-headed classifier trained jointly with a generator.
    Cgan,
    /// Plain generator/discriminator pair.
    GanRaw,
}

impl ModelChoice {
    pub fn tag(self) -> &'static str {
        match self {
            ModelChoice::Svm => "svm",
            ModelChoice::Cnn => "cnn",
            ModelChoice::Resnet => "resnet",
            ModelChoice::Cgan => "cgan",
            ModelChoice::GanRaw => "gan-raw",
        }
    }
}

fn default_samples() -> usize {
    4000
}

fn default_test_samples() -> usize {
    1000
}

fn default_modes() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySettings {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_test_samples")]
    pub test_samples: usize,
    #[serde(default = "default_modes")]
    pub modes: usize,
}

impl Default for ToySettings {
    fn default() -> Self {
        ToySettings { samples: default_samples(), test_samples: default_test_samples(), modes: default_modes() }
    }
}

fn default_d_steps() -> usize {
    1
}

fn default_generator_loss() -> GeneratorLoss {
    GeneratorLoss::NonSaturating
}

fn default_gan_optimizer() -> OptimizerConfig {
    OptimizerConfig::gan_default()
}

fn default_adv_weight() -> f64 {
    1.0
}

fn default_window() -> usize {
    100
}

/// Generator side of `cgan` and both networks of `gan-raw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanSettings {
    pub noise_dim: usize,
    #[serde(default = "default_d_steps")]
    pub d_steps: usize,
    /// Generator updates for `gan-raw`; `cgan` runs for `epochs` instead.
    #[serde(default)]
    pub steps: usize,
    #[serde(default = "default_generator_loss")]
    pub generator_loss: GeneratorLoss,
    #[serde(default = "default_gan_optimizer")]
    pub g_optimizer: OptimizerConfig,
    #[serde(default = "default_gan_optimizer")]
    pub d_optimizer: OptimizerConfig,
    /// Weight of the real/fake loss in the `cgan` classifier update.
    #[serde(default = "default_adv_weight")]
    pub adv_weight: f64,
    pub generator: Recipe,
    /// Required for `gan-raw`; `cgan` uses `architecture`.
    #[serde(default)]
    pub discriminator: Option<Recipe>,
    #[serde(default)]
    pub init_std: Option<f64>,
    /// Trailing steps averaged in `equilibrium.json`.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_roc_batch() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Row name in comparison tables and ROC legends; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    pub dataset: DatasetName,
    /// Directory with the dataset files (not used for `toy`).
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Per-class cap on the training set.
    #[serde(default)]
    pub per_class_cap: Option<usize>,
    /// Per-class cap on the test set.
    #[serde(default)]
    pub test_per_class_cap: Option<usize>,
    /// Seed for subsampling and toy data; defaults to `seed`.
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub toy: ToySettings,
    pub model: ModelChoice,
    /// Network recipe for every model except `gan-raw`.
    #[serde(default)]
    pub architecture: Option<Recipe>,
    #[serde(default)]
    pub init_std: Option<f64>,
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub loss: Option<ClassifierLoss>,
    #[serde(default)]
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub gan: Option<GanSettings>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Class whose one-vs-rest curve goes into evaluation reports.
    #[serde(default)]
    pub roc_class: usize,
    /// Samples per forward pass during evaluation.
    #[serde(default = "default_roc_batch")]
    pub eval_batch: usize,
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    /// Output directory: the flag, else `output_dir`, else `runs/<name>`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match (flag, &self.config.output_dir) {
            (Some(dir), _) => dir.to_path_buf(),
            (None, Some(dir)) => self.resolve(dir),
            (None, None) => self.base_dir.join("runs").join(&self.config.name),
        }
    }

    pub fn data_dir(&self) -> Option<PathBuf> {
        self.config.data_dir.as_deref().map(|d| self.resolve(d))
    }
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let config = parse_config(&text).map_err(|reason| CliError::Config { path: path.to_path_buf(), reason })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, base_dir };
    if loaded.config.dataset != DatasetName::Toy {
        match loaded.data_dir() {
            Some(dir) if dir.is_dir() => {}
            Some(dir) => return Err(CliError::Missing(dir)),
            None => {
                return Err(CliError::Config {
                    path: path.to_path_buf(),
                    reason: format!("dataset `{}` needs data_dir", loaded.config.dataset.tag()),
                })
            }
        }
    }
    Ok(loaded)
}

/// Parses and cross-checks a config; the error is a human-readable reason.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
    config.check()?;
    Ok(config)
}

impl ExperimentConfig {
    fn check(&self) -> Result<(), String> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(format!("name `{}` must be a non-empty plain file name", self.name));
        }
        if self.eval_batch == 0 {
            return Err("eval_batch must be at least 1".into());
        }
        let expected = match self.model {
            ModelChoice::Svm => Some(ModelKind::LinearSvm),
            ModelChoice::Cnn => Some(ModelKind::Cnn),
            ModelChoice::Resnet => Some(ModelKind::Resnet),
            ModelChoice::Cgan => Some(ModelKind::GanClassifier),
            ModelChoice::GanRaw => None,
        };
        match (expected, &self.architecture) {
            (Some(kind), Some(recipe)) => {
                let got = recipe_kind(recipe);
                if got != kind {
                    return Err(format!("model `{}` needs a `{}` architecture, got `{}`", self.model.tag(), kind.tag(), got.tag()));
                }
            }
            (Some(_), None) => return Err(format!("model `{}` needs an architecture", self.model.tag())),
            (None, Some(_)) => return Err("gan-raw takes gan.generator and gan.discriminator, not architecture".into()),
            (None, None) => {}
        }
        if matches!(self.model, ModelChoice::Cgan | ModelChoice::GanRaw) {
            let gan = self.gan.as_ref().ok_or_else(|| format!("model `{}` needs a gan section", self.model.tag()))?;
            if recipe_kind(&gan.generator) != ModelKind::Generator {
                return Err("gan.generator must be a generator recipe".into());
            }
            if self.model == ModelChoice::GanRaw {
                match &gan.discriminator {
                    Some(d) if recipe_kind(d) == ModelKind::Discriminator => {}
                    Some(_) => return Err("gan.discriminator must be a discriminator recipe".into()),
                    None => return Err("gan-raw needs gan.discriminator".into()),
                }
                if gan.steps == 0 {
                    return Err("gan-raw needs gan.steps ≥ 1".into());
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed.unwrap_or(self.seed)
    }

    /// The classifier network (every model except `gan-raw`).
    pub fn classifier(&self) -> CliResult<ModelSpec> {
        let recipe = self.architecture.as_ref().ok_or_else(|| CliError::Usage("config has no architecture".into()))?;
        Ok(recipe.build()?.with_init_std(self.init_std.unwrap_or(DEFAULT_INIT_STD))?)
    }

    pub fn gan(&self) -> CliResult<&GanSettings> {
        self.gan.as_ref().ok_or_else(|| CliError::Usage(format!("model `{}` needs a gan section", self.model.tag())))
    }

    pub fn generator(&self) -> CliResult<ModelSpec> {
        let gan = self.gan()?;
        Ok(gan.generator.build()?.with_init_std(gan.init_std.unwrap_or(DEFAULT_INIT_STD))?)
    }

    pub fn discriminator(&self) -> CliResult<ModelSpec> {
        let gan = self.gan()?;
        let recipe = gan.discriminator.as_ref().ok_or_else(|| CliError::Usage("gan-raw needs gan.discriminator".into()))?;
        Ok(recipe.build()?.with_init_std(gan.init_std.unwrap_or(DEFAULT_INIT_STD))?)
    }

    pub fn classifier_config(&self, model: &ModelSpec) -> ClassifierConfig {
        ClassifierConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            optimizer: self.optimizer.unwrap_or_else(OptimizerConfig::baseline_default),
            loss: self.loss.unwrap_or_else(|| ClassifierLoss::default_for(model.kind())),
        }
    }

    pub fn adversarial_config(&self) -> CliResult<AdversarialConfig> {
        let gan = self.gan()?;
        Ok(AdversarialConfig {
            adv_weight: gan.adv_weight,
            noise_dim: gan.noise_dim,
            generator_loss: gan.generator_loss,
            g_optimizer: gan.g_optimizer,
        })
    }

    pub fn gan_config(&self) -> CliResult<GanConfig> {
        let gan = self.gan()?;
        Ok(GanConfig {
            noise_dim: gan.noise_dim,
            d_steps: gan.d_steps,
            batch_size: self.batch_size,
            steps: gan.steps,
            generator_loss: gan.generator_loss,
            seed: self.seed,
            g_optimizer: gan.g_optimizer,
            d_optimizer: gan.d_optimizer,
        })
    }
}

fn recipe_kind(recipe: &Recipe) -> ModelKind {
    match recipe {
        Recipe::Generator { .. } | Recipe::MlpGenerator { .. } => ModelKind::Generator,
        Recipe::Discriminator { .. } | Recipe::MlpDiscriminator { .. } => ModelKind::Discriminator,
        Recipe::GanClassifier { .. } => ModelKind::GanClassifier,
        Recipe::Cnn { .. } => ModelKind::Cnn,
        Recipe::Resnet { .. } => ModelKind::Resnet,
        Recipe::LinearSvm { .. } => ModelKind::LinearSvm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SVM: &str = r#"{
        "name": "svm", "dataset": "toy", "model": "svm", "batch_size": 16, "seed": 1, "epochs": 2,
        "architecture": {"model": "linear-svm", "input_shape": [1, 1, 2], "classes": 8}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse_config(SVM).unwrap();
        assert_eq!(c.toy, ToySettings::default());
        assert_eq!(c.data_seed(), 1);
        let model = c.classifier().unwrap();
        assert_eq!(c.classifier_config(&model).loss, ClassifierLoss::Hinge { margin: 1.0, l2: 1e-4 });
    }

    #[test]
    fn seed_is_mandatory_and_unknown_fields_rejected() {
        assert!(parse_config(&SVM.replace("\"seed\": 1,", "")).is_err());
        assert!(parse_config(&SVM.replace("\"epochs\"", "\"epoch\"")).is_err());
    }

    #[test]
    fn architecture_must_match_model() {
        let err = parse_config(&SVM.replace("\"model\": \"svm\"", "\"model\": \"cnn\"")).unwrap_err();
        assert!(err.contains("cnn"), "{err}");
        assert!(parse_config(&SVM.replace("\"model\": \"svm\"", "\"model\": \"gan-raw\"")).is_err());
    }
}
