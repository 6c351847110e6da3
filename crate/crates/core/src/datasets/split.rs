use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Sample};

/// Sequence-level split: whole sequences go to one side so near-duplicate
/// neighbouring frames never straddle train and test. Frame order inside
/// each side follows the input order.
pub fn split_train_test(
    samples: Vec<Sample>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>), DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(fraction));
    }
    let sequences: BTreeSet<&str> = samples.iter().map(|s| s.sequence_id.as_str()).collect();
    let mut sequences: Vec<String> = sequences.into_iter().map(str::to_string).collect();
    sequences.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * sequences.len() as f64).round() as usize).min(sequences.len());
    let train_set: BTreeSet<String> = sequences.into_iter().take(n_train).collect();
    Ok(samples.into_iter().partition(|s| train_set.contains(&s.sequence_id)))
}
