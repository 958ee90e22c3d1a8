use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Sample;

/// Train/test indices into `samples`. Whole scenarios are shuffled and the
/// first `floor(fraction · scenarios)` go to training; both index lists keep
/// the original sample order.
pub fn split_indices(samples: &[Sample], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot split an empty corpus"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let mut scenarios: Vec<u64> = samples.iter().map(|s| s.scenario).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    scenarios.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * scenarios.len() as f64).floor() as usize;
    let mut train_ids = scenarios[..n_train].to_vec();
    train_ids.sort_unstable();
    let (train, test) = (0..samples.len()).partition(|&i| train_ids.binary_search(&samples[i].scenario).is_ok());
    Ok((train, test))
}

pub fn split(samples: &[Sample], fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let (train, test) = split_indices(samples, fraction, seed)?;
    let pick = |ix: Vec<usize>| ix.into_iter().map(|i| samples[i].clone()).collect();
    Ok((pick(train), pick(test)))
}
