//! Loading the train and test parts named by a config.

use std::fs;
use std::path::{Path, PathBuf};

use gancmp::data::{
    cifar10_files, load_cifar10, load_mnist, make_toy_mixture, mnist_files, split, DataPart, LabeledDataset, RawDataset,
    SplitSpec,
};
use sha2::{Digest, Sha256};

use crate::config::{DatasetName, ToySettings};
use crate::error::{CliError, CliResult};

pub const CHECKSUM_FILE: &str = "SHA256SUMS";

/// Everything needed to materialize one part of a dataset.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub dataset: DatasetName,
    pub dir: Option<PathBuf>,
    pub per_class_cap: Option<usize>,
    pub test_per_class_cap: Option<usize>,
    pub seed: u64,
    pub toy: ToySettings,
}

impl DataSource {
    pub fn load(&self, part: DataPart) -> CliResult<LabeledDataset> {
        let cap = match part {
            DataPart::Train => self.per_class_cap,
            DataPart::Test => self.test_per_class_cap,
        };
        if self.dataset == DatasetName::Toy {
            let (n, seed) = match part {
                DataPart::Train => (self.toy.samples, self.seed),
                DataPart::Test => (self.toy.test_samples, self.seed.wrapping_add(1)),
            };
            return capped(make_toy_mixture(n, self.toy.modes, seed)?, cap, self.seed);
        }
        let raw = load_raw(self.dataset, self.dir()?, part)?;
        capped(raw.normalize(format!("{}-{}", self.dataset.tag(), part_tag(part)))?, cap, self.seed)
    }

    fn dir(&self) -> CliResult<&Path> {
        self.dir
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("dataset `{}` needs a data directory", self.dataset.tag())))
    }
}

pub fn part_tag(part: DataPart) -> &'static str {
    match part {
        DataPart::Train => "train",
        DataPart::Test => "test",
    }
}

fn capped(ds: LabeledDataset, cap: Option<usize>, seed: u64) -> CliResult<LabeledDataset> {
    match cap {
        None => Ok(ds),
        Some(cap) => Ok(split(&ds, &SplitSpec { test_fraction: 0.0, seed, per_class_cap: Some(cap) })?.0),
    }
}

pub fn load_raw(dataset: DatasetName, dir: &Path, part: DataPart) -> CliResult<RawDataset> {
    if !dir.is_dir() {
        return Err(CliError::Missing(dir.to_path_buf()));
    }
    let raw = match dataset {
        DatasetName::Mnist => load_mnist(dir, part),
        DatasetName::Cifar10 => load_cifar10(dir, part),
        DatasetName::Toy => return Err(CliError::Usage("the toy ring has no files".into())),
    };
    raw.map_err(|e| match e {
        gancmp::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            CliError::Missing(dir.join(expected_files(dataset).join(", ")))
        }
        other => other.into(),
    })
}

pub fn expected_files(dataset: DatasetName) -> Vec<&'static str> {
    match dataset {
        DatasetName::Mnist => [DataPart::Train, DataPart::Test].into_iter().flat_map(mnist_files).collect(),
        DatasetName::Cifar10 => [DataPart::Train, DataPart::Test].into_iter().flat_map(cifar10_files).collect(),
        DatasetName::Toy => Vec::new(),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path).map_err(CliError::io(path))?))
}

/// Checks every entry of a `sha256sum`-style listing (`<hex>  <name>` per
/// line, optional `*` before binary names). Returns the verified names.
pub fn verify_checksums(dir: &Path) -> CliResult<Vec<String>> {
    let listing_path = dir.join(CHECKSUM_FILE);
    let listing = fs::read_to_string(&listing_path).map_err(CliError::io(&listing_path))?;
    let mut verified = Vec::new();
    for (i, line) in listing.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (digest, name) = line
            .split_once(char::is_whitespace)
            .map(|(d, n)| (d, n.trim_start().trim_start_matches('*')))
            .filter(|(d, n)| d.len() == 64 && !n.is_empty())
            .ok_or_else(|| gancmp::Error::Format(format!("{}:{}: malformed checksum line", listing_path.display(), i + 1)))?;
        let path = dir.join(name);
        if sha256_file(&path)? != digest.to_ascii_lowercase() {
            return Err(CliError::Checksum(path));
        }
        verified.push(name.to_string());
    }
    Ok(verified)
}
