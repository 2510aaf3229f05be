//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "GANCKPT1"
//! version    u32
//! kind       u32 length + UTF-8 tag
//! config     u32 length + UTF-8 JSON ({"recipe": ..., "experiment": ...})
//! count      u32
//! count × { name: u32 length + UTF-8, rank: u32, dims: rank × u64, values: numel × f64 }
//! ```

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use super::{ModelKind, ModelSpec, Recipe};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GANCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A decoded checkpoint: kind tag, configuration echo and named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub config: Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    /// Captures `params` for `model`; `experiment` is echoed verbatim.
    pub fn new(model: &ModelSpec, params: &ParamSet, experiment: Value) -> Result<Self> {
        model.check_params(params)?;
        let recipe = serde_json::to_value(model.recipe()).map_err(|e| Error::format(e.to_string()))?;
        Ok(Checkpoint {
            kind: model.kind(),
            config: json!({ "recipe": recipe, "experiment": experiment }),
            tensors: params.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        })
    }

    pub fn experiment(&self) -> &Value {
        &self.config["experiment"]
    }

    /// Rebuilds the model from the recipe echo and checks every tensor against it.
    pub fn restore(&self) -> Result<(ModelSpec, ParamSet)> {
        let recipe: Recipe = serde_json::from_value(self.config["recipe"].clone())
            .map_err(|e| Error::format(format!("checkpoint recipe: {e}")))?;
        let model = recipe.build()?;
        if model.kind() != self.kind {
            return Err(Error::Consistency(format!(
                "checkpoint tagged `{}` holds a `{}` recipe",
                self.kind.tag(),
                model.kind().tag()
            )));
        }
        let expected = model.param_shapes();
        if expected.len() != self.tensors.len() {
            return Err(Error::Consistency(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        let mut params = ParamSet::new();
        for ((name, shape, trainable), (tname, t)) in expected.into_iter().zip(&self.tensors) {
            if name != *tname || shape != t.shape() {
                return Err(Error::Consistency(format!(
                    "checkpoint tensor `{tname}` {:?} does not match expected `{name}` {shape:?}",
                    t.shape()
                )));
            }
            params.insert(name, t.clone(), trainable)?;
        }
        Ok((model, params))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_str(&mut out, self.kind.tag());
        put_str(&mut out, &self.config.to_string());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a complete checkpoint. Any truncation, trailing data or bad
    /// header is a format error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::format("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        let tag = r.string()?;
        let kind = ModelKind::from_tag(&tag).ok_or_else(|| Error::format(format!("unknown model kind `{tag}`")))?;
        let config: Value =
            serde_json::from_str(&r.string()?).map_err(|e| Error::format(format!("checkpoint config: {e}")))?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            if rank > r.remaining() / 8 {
                return Err(Error::format(format!("tensor `{name}`: rank {rank} exceeds the file")));
            }
            let shape = (0..rank)
                .map(|_| r.u64().and_then(|d| usize::try_from(d).map_err(|_| Error::format("dimension overflow"))))
                .collect::<Result<Vec<_>>>()?;
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::format(format!("tensor `{name}` {shape:?} exceeds the file")))?;
            let data = r.take(numel * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push((name, Tensor::new(&shape, data)?));
        }
        if r.remaining() != 0 {
            return Err(Error::format(format!("{} trailing bytes after the last tensor", r.remaining())));
        }
        Ok(Checkpoint { kind, config, tensors })
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::format(format!("truncated checkpoint: wanted {n} bytes at offset {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::format("string is not UTF-8"))
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_linear_svm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn file_size_matches_layout_arithmetic() {
        let m = build_linear_svm(&[3], 2).unwrap();
        let ps = m.init_params(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ck = Checkpoint::new(&m, &ps, Value::Null).unwrap();
        let bytes = ck.to_bytes();
        let config_len = ck.config.to_string().len();
        let header = 8 + 4 + (4 + "linear-svm".len()) + (4 + config_len) + 4;
        // svm.0.weight [3, 2] and svm.0.bias [2]
        let weight = 4 + "svm.0.weight".len() + 4 + 2 * 8 + 6 * 8;
        let bias = 4 + "svm.0.bias".len() + 4 + 8 + 2 * 8;
        assert_eq!(bytes.len(), header + weight + bias);
    }

    #[test]
    fn bad_magic_and_version_are_format_errors() {
        let m = build_linear_svm(&[3], 2).unwrap();
        let ps = m.init_params(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let good = Checkpoint::new(&m, &ps, Value::Null).unwrap().to_bytes();
        let mut bad = good.clone();
        bad[0] ^= 0xff;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[8] = 2;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Format(_))));
        let mut long = good;
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::Format(_))));
    }
}
