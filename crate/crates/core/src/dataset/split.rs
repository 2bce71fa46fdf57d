use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const TEST_RATIO: f64 = 0.2;
pub const VALIDATION_FRACTION: f64 = 0.1;
pub const MIN_SPLIT_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Index form of [`split`]: disjoint index sets covering `0..n`.
pub fn split_indices(n: usize, test_ratio: f64, val_fraction: f64, seed: u64) -> Result<Split<usize>> {
    if n < MIN_SPLIT_SIZE {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SPLIT_SIZE} records to split, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&test_ratio) || !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::Config(format!(
            "split ratios must lie in [0, 1): test {test_ratio}, validation {val_fraction}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_ratio * n as f64).round() as usize;
    let pool = n - n_test;
    let n_val = (val_fraction * pool as f64).round() as usize;
    let test = idx[..n_test].to_vec();
    let val = idx[n_test..n_test + n_val].to_vec();
    let train = idx[n_test + n_val..].to_vec();
    Ok(Split { train, val, test })
}

/// Seeded 8:2 train/test split with 10% of the training pool held out for
/// validation.
pub fn split<T: Clone>(records: &[T], seed: u64) -> Result<Split<T>> {
    let s = split_indices(records.len(), TEST_RATIO, VALIDATION_FRACTION, seed)?;
    let pick = |ids: &[usize]| ids.iter().map(|&i| records[i].clone()).collect();
    Ok(Split {
        train: pick(&s.train),
        val: pick(&s.val),
        test: pick(&s.test),
    })
}
