use enggnn_core::seed::{derive_seed, rng_from_seed};
use rand::seq::SliceRandom;

use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub replication: usize,
    /// Seed of this replication's shuffle.
    pub seed: u64,
    /// Ascending sample indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Class-stratified train/test split. Each class contributes
/// `round(fraction · n_c)` training samples, clamped so both sides get at
/// least one.
pub fn stratified_split(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::Invalid(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(HarnessError::Invalid(format!(
                "class {class} has {} sample(s); stratified splitting needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let k = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(HarnessError::Invalid("labels must be 0 or 1".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_and_replicate(labels: &[u8], fraction: f64, replications: usize, master_seed: u64) -> Result<Vec<Split>> {
    (0..replications)
        .map(|r| {
            let seed = derive_seed(master_seed, r as u64, "split");
            let (train, test) = stratified_split(labels, fraction, seed)?;
            Ok(Split {
                replication: r,
                seed,
                train,
                test,
            })
        })
        .collect()
}
