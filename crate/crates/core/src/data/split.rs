use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// How to divide a dataset into train and test parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of each class held out for testing, in [0, 1).
    pub test_fraction: f64,
    pub seed: u64,
    /// Keep at most this many training samples per class.
    #[serde(default)]
    pub per_class_cap: Option<usize>,
}

/// Train and test index sets, each sorted ascending.
///
/// Within every class the indices are shuffled with `seed`; the first
/// `round(n · test_fraction)` go to test and the next `cap` (or all the rest)
/// to train.
pub fn split_indices(labels: &[usize], classes: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::contract(format!("test fraction {} outside [0, 1)", spec.test_fraction)));
    }
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        let slot = by_class
            .get_mut(l)
            .ok_or_else(|| Error::contract(format!("label {l} outside 0..{classes}")))?;
        slot.push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * spec.test_fraction).round() as usize;
        let available = members.len() - n_test;
        let n_train = match spec.per_class_cap {
            Some(cap) if cap > available => {
                return Err(Error::contract(format!(
                    "cap {cap} exceeds the {available} training samples of class {class}"
                )))
            }
            Some(cap) => cap,
            None => available,
        };
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..n_test + n_train]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds.labels(), ds.classes(), spec)?;
    Ok((ds.subset(&train, format!("{}-train", ds.name()))?, ds.subset(&test, format!("{}-test", ds.name()))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<usize> {
        (0..30).map(|i| i % 3).collect()
    }

    #[test]
    fn cap_limits_train_per_class() {
        let spec = SplitSpec { test_fraction: 0.2, seed: 3, per_class_cap: Some(2) };
        let (train, test) = split_indices(&labels(), 3, &spec).unwrap();
        assert_eq!(train.len(), 6);
        for c in 0..3 {
            assert_eq!(train.iter().filter(|&&i| i % 3 == c).count(), 2);
        }
        assert_eq!(test.len(), 6);
    }

    #[test]
    fn same_seed_same_split() {
        let spec = SplitSpec { test_fraction: 0.3, seed: 11, per_class_cap: None };
        assert_eq!(split_indices(&labels(), 3, &spec).unwrap(), split_indices(&labels(), 3, &spec).unwrap());
    }

    #[test]
    fn oversized_cap_is_rejected() {
        let spec = SplitSpec { test_fraction: 0.5, seed: 0, per_class_cap: Some(6) };
        assert!(matches!(split_indices(&labels(), 3, &spec), Err(Error::Contract(_))));
    }
}
