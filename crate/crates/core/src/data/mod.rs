//! Datasets: binary parsers, normalization, splits, toy data and image export.

mod formats;
mod image;
mod split;
mod toy;

pub use formats::{parse_cifar10, parse_idx, CIFAR_RECORD_LEN, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
pub use image::{export_images, parse_pnm, PnmImage};
pub use split::{split, split_indices, SplitSpec};
pub use toy::{make_toy_mixture, mode_centers, mode_histogram, nearest_mode, TOY_RADIUS, TOY_SCALE, TOY_SIGMA};

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Byte images as stored on disk, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    /// `[channels, height, width]` of one sample.
    pub sample_shape: [usize; 3],
    /// Row-major `N × C × H × W` bytes.
    pub pixels: Vec<u8>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn normalize(&self, name: impl Into<String>) -> Result<LabeledDataset> {
        let [c, h, w] = self.sample_shape;
        let images = Tensor::new(&[self.len(), c, h, w], self.pixels.iter().map(|&p| normalize(p)).collect())?;
        LabeledDataset::new(images, self.labels.clone(), self.classes, name)
    }

    /// Concatenates datasets with the same sample shape and class count.
    pub fn concat(parts: Vec<RawDataset>) -> Result<RawDataset> {
        let mut iter = parts.into_iter();
        let mut out = iter.next().ok_or_else(|| Error::contract("nothing to concatenate"))?;
        for p in iter {
            if p.sample_shape != out.sample_shape || p.classes != out.classes {
                return Err(Error::Consistency(format!(
                    "cannot join {:?}/{} samples with {:?}/{}",
                    p.sample_shape, p.classes, out.sample_shape, out.classes
                )));
            }
            out.pixels.extend(p.pixels);
            out.labels.extend(p.labels);
        }
        Ok(out)
    }
}

/// Images in [−1, 1] with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Tensor,
    labels: Vec<usize>,
    classes: usize,
    name: String,
}

impl LabeledDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize, name: impl Into<String>) -> Result<Self> {
        if images.rank() != 4 {
            return Err(Error::dim(format!("dataset images must be [N, C, H, W], got {:?}", images.shape())));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::Consistency(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Consistency(format!("label {l} outside 0..{classes}")));
        }
        if let Some(v) = images.data().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::contract(format!("image value {v} outside [-1, 1]")));
        }
        Ok(LabeledDataset { images, labels, classes, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `[C, H, W]` of one sample.
    pub fn sample_shape(&self) -> &[usize] {
        &self.images.shape()[1..]
    }

    /// The samples at `indices`, in that order.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let images = self.images.select_rows(indices)?;
        Ok((images, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<LabeledDataset> {
        let (images, labels) = self.batch(indices)?;
        Ok(LabeledDataset { images, labels, classes: self.classes, name: name.into() })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Byte to [−1, 1]: `p / 127.5 − 1`.
pub fn normalize(pixel: u8) -> f64 {
    f64::from(pixel) / 127.5 - 1.0
}

/// Range-checked [`normalize`] for real-valued pixel intensities.
pub fn normalize_value(pixel: f64) -> Result<f64> {
    if !(0.0..=255.0).contains(&pixel) {
        return Err(Error::contract(format!("pixel value {pixel} outside [0, 255]")));
    }
    Ok(pixel / 127.5 - 1.0)
}

/// Inverse of [`normalize`], rounding to the nearest byte.
pub fn denormalize(value: f64) -> Result<u8> {
    if !(-1.0..=1.0).contains(&value) {
        return Err(Error::contract(format!("value {value} outside [-1, 1]")));
    }
    Ok(((value + 1.0) * 127.5).round() as u8)
}

/// Reads a file, inflating it when the name ends in `.gz`.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Which half of a dataset distribution to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataPart {
    Train,
    Test,
}

/// Files making up one part of MNIST, plain or gzipped.
pub fn mnist_files(part: DataPart) -> [&'static str; 2] {
    match part {
        DataPart::Train => ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
        DataPart::Test => ["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
    }
}

/// Files making up one part of CIFAR-10.
pub fn cifar10_files(part: DataPart) -> Vec<&'static str> {
    match part {
        DataPart::Train => vec!["data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin", "data_batch_5.bin"],
        DataPart::Test => vec!["test_batch.bin"],
    }
}

/// `dir/name`, or `dir/name.gz` when only the compressed file exists.
pub fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{} (or .gz) not found", plain.display()),
    )))
}

pub fn load_mnist(dir: &Path, part: DataPart) -> Result<RawDataset> {
    let [images, labels] = mnist_files(part);
    let images = read_maybe_gz(&locate(dir, images)?)?;
    let labels = read_maybe_gz(&locate(dir, labels)?)?;
    parse_idx(&images, &labels, 10)
}

pub fn load_cifar10(dir: &Path, part: DataPart) -> Result<RawDataset> {
    let parts = cifar10_files(part)
        .into_iter()
        .map(|f| parse_cifar10(&read_maybe_gz(&locate(dir, f)?)?))
        .collect::<Result<Vec<_>>>()?;
    RawDataset::concat(parts)
}
