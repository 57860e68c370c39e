use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RNG stream used for splitting; training and initialisation use others.
pub const SPLIT_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config(format!("split ratios must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

/// Sample indices of each split, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split of `classes` (class index per sample). Within every
/// class, validation and test each receive `max(1, round(n · ratio))`
/// samples and training the remainder.
pub fn split_dataset(classes: &[usize], ratios: SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let k = classes.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); k];
    for (i, &c) in classes.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    let mut split = Split { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (c, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        if n < 3 {
            return Err(Error::Data(format!("class {c} has {n} samples; at least 3 are needed to stratify")));
        }
        members.shuffle(&mut rng);
        let n_test = ((n as f64 * ratios.test).round() as usize).max(1);
        let n_val = ((n as f64 * ratios.val).round() as usize).max(1);
        if n_test + n_val >= n {
            return Err(Error::Data(format!("class {c} has {n} samples; too few for the requested ratios")));
        }
        split.test.extend_from_slice(&members[..n_test]);
        split.val.extend_from_slice(&members[n_test..n_test + n_val]);
        split.train.extend_from_slice(&members[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_per_class() {
        let classes: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let s = split_dataset(&classes, SplitRatios::default(), 7).unwrap();
        for c in 0..3 {
            let count = |v: &[usize]| v.iter().filter(|&&i| classes[i] == c).count();
            assert_eq!((count(&s.train), count(&s.val), count(&s.test)), (8, 1, 1));
        }
    }

    #[test]
    fn deterministic_partition() {
        let classes: Vec<usize> = (0..57).map(|i| usize::from(i % 5 == 0)).collect();
        let a = split_dataset(&classes, SplitRatios::default(), 11).unwrap();
        assert_eq!(a, split_dataset(&classes, SplitRatios::default(), 11).unwrap());
        assert_ne!(a, split_dataset(&classes, SplitRatios::default(), 12).unwrap());
        let mut all: Vec<usize> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..57).collect::<Vec<_>>());
    }

    #[test]
    fn tiny_class_rejected() {
        assert!(split_dataset(&[0, 0, 0, 1, 1], SplitRatios::default(), 0).is_err());
        assert!(split_dataset(&[0, 0, 0], SplitRatios::default(), 0).is_ok());
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let r = SplitRatios { train: 0.7, val: 0.1, test: 0.1 };
        assert!(r.validate().is_err());
    }
}
