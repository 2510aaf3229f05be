//! MNIST IDX and CIFAR-10 binary parsers.
//!
//! Both parsers validate every length before touching the payload and reject
//! trailing bytes, so a damaged file never yields a partially filled dataset.

use super::RawDataset;
use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// One label byte followed by 3 × 32 × 32 channel-planar pixels.
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;
const CIFAR_CLASSES: usize = 10;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(format!("{what}: truncated header")))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != expected {
        return Err(Error::format(format!("{what}: magic {magic:#010x}, expected {expected:#010x}")));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: Option<usize>, what: &str) -> Result<()> {
    let expected = expected.ok_or_else(|| Error::format(format!("{what}: declared size overflows")))?;
    let actual = bytes.len() - header;
    if actual != expected {
        return Err(Error::format(format!("{what}: payload is {actual} bytes, header declares {expected}")));
    }
    Ok(())
}

/// Parses an IDX image file (`[N, rows, cols]` bytes) and its label file.
pub fn parse_idx(images: &[u8], labels: &[u8], classes: usize) -> Result<RawDataset> {
    check_magic(images, IDX_IMAGE_MAGIC, "idx images")?;
    let count = be_u32(images, 4, "idx images")? as usize;
    let rows = be_u32(images, 8, "idx images")? as usize;
    let cols = be_u32(images, 12, "idx images")? as usize;
    check_payload(images, 16, count.checked_mul(rows).and_then(|v| v.checked_mul(cols)), "idx images")?;

    check_magic(labels, IDX_LABEL_MAGIC, "idx labels")?;
    let label_count = be_u32(labels, 4, "idx labels")? as usize;
    check_payload(labels, 8, Some(label_count), "idx labels")?;

    if label_count != count {
        return Err(Error::Consistency(format!("{count} images but {label_count} labels")));
    }
    let labels: Vec<usize> = labels[8..].iter().map(|&b| b as usize).collect();
    if let Some(l) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Consistency(format!("label {l} outside 0..{classes}")));
    }
    Ok(RawDataset { sample_shape: [1, rows, cols], pixels: images[16..].to_vec(), labels, classes })
}

/// Parses one CIFAR-10 batch file.
pub fn parse_cifar10(bytes: &[u8]) -> Result<RawDataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::format(format!(
            "cifar-10 batch of {} bytes is not a multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    let mut pixels = Vec::with_capacity(bytes.len());
    let mut labels = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    for record in bytes.chunks_exact(CIFAR_RECORD_LEN) {
        let label = record[0] as usize;
        if label >= CIFAR_CLASSES {
            return Err(Error::Consistency(format!("cifar-10 label {label} outside 0..{CIFAR_CLASSES}")));
        }
        labels.push(label);
        pixels.extend_from_slice(&record[1..]);
    }
    Ok(RawDataset { sample_shape: [3, 32, 32], pixels, labels, classes: CIFAR_CLASSES })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [IDX_IMAGE_MAGIC, count, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn hand_built_fixture() {
        let ds = parse_idx(&idx_images(1, 2, 2, &[0, 128, 255, 64]), &idx_labels(&[7]), 10).unwrap();
        assert_eq!(ds.sample_shape, [1, 2, 2]);
        assert_eq!(ds.pixels, vec![0, 128, 255, 64]);
        assert_eq!(ds.labels, vec![7]);
    }

    #[test]
    fn empty_payload() {
        let ds = parse_idx(&idx_images(0, 28, 28, &[]), &idx_labels(&[]), 10).unwrap();
        assert!(ds.is_empty());
        assert!(parse_cifar10(&[]).unwrap().is_empty());
    }

    #[test]
    fn idx_errors_are_typed() {
        let images = idx_images(1, 2, 2, &[0, 0, 0, 0]);
        assert!(matches!(parse_idx(&images, &idx_labels(&[10]), 10), Err(Error::Consistency(_))));
        assert!(matches!(parse_idx(&images, &idx_labels(&[1, 2]), 10), Err(Error::Consistency(_))));
        assert!(matches!(parse_idx(&images[..18], &idx_labels(&[1]), 10), Err(Error::Format(_))));
        assert!(matches!(parse_idx(&idx_labels(&[1]), &images, 10), Err(Error::Format(_))));
        let huge = idx_images(u32::MAX, u32::MAX, u32::MAX, &[]);
        assert!(matches!(parse_idx(&huge, &idx_labels(&[]), 10), Err(Error::Format(_))));
    }

    #[test]
    fn cifar_record_round_trip() {
        let mut record = vec![3u8];
        record.extend((0..3072).map(|i| (i % 251) as u8));
        let ds = parse_cifar10(&record).unwrap();
        assert_eq!(ds.labels, vec![3]);
        assert_eq!(ds.pixels, record[1..].to_vec());
        record[0] = 255;
        assert!(matches!(parse_cifar10(&record), Err(Error::Consistency(_))));
        assert!(matches!(parse_cifar10(&record[..100]), Err(Error::Format(_))));
    }
}
