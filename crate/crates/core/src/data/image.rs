//! Binary PGM/PPM export of image tensors.

use std::fs;
use std::path::{Path, PathBuf};

use super::denormalize;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A decoded P5/P6 image with interleaved bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub bytes: Vec<u8>,
}

impl PnmImage {
    /// Channel-planar `[C, H, W]` bytes.
    pub fn planar(&self) -> Vec<u8> {
        let plane = self.width * self.height;
        (0..self.channels)
            .flat_map(|c| (0..plane).map(move |i| self.bytes[i * self.channels + c]))
            .collect()
    }
}

fn encode(channels: usize, h: usize, w: usize, planar: &[u8]) -> Vec<u8> {
    let magic = if channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let plane = h * w;
    for i in 0..plane {
        for c in 0..channels {
            out.push(planar[c * plane + i]);
        }
    }
    out
}

/// Writes each image of `[N, C, H, W]` (values in [−1, 1]) as
/// `sample_0000.pgm` (C = 1) or `sample_0000.ppm` (C = 3).
pub fn export_images(images: &Tensor, dir: &Path) -> Result<Vec<PathBuf>> {
    let &[n, c, h, w] = images.shape() else {
        return Err(Error::dim(format!("expected [N, C, H, W], got {:?}", images.shape())));
    };
    let ext = match c {
        1 => "pgm",
        3 => "ppm",
        _ => return Err(Error::contract(format!("cannot export {c}-channel images"))),
    };
    fs::create_dir_all(dir)?;
    let size = c * h * w;
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let planar = images.data()[i * size..(i + 1) * size]
            .iter()
            .map(|&v| denormalize(v))
            .collect::<Result<Vec<u8>>>()?;
        let path = dir.join(format!("sample_{i:04}.{ext}"));
        fs::write(&path, encode(c, h, w, &planar))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads the binary PNM files written by [`export_images`] (single-space
/// separated header, maxval 255, no comments).
pub fn parse_pnm(bytes: &[u8]) -> Result<PnmImage> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            pos += 1;
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated pnm header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::format("pnm header is not ASCII"))?);
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        m => return Err(Error::format(format!("unsupported pnm magic {m}"))),
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::format(format!("bad pnm header field `{s}`")));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(Error::format(format!("unsupported maxval {maxval}")));
    }
    let payload = bytes.get(pos..).unwrap_or_default();
    if Some(payload.len()) != width.checked_mul(height).and_then(|v| v.checked_mul(channels)) {
        return Err(Error::format("pnm payload size does not match header"));
    }
    Ok(PnmImage { channels, width, height, bytes: payload.to_vec() })
}
