use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Test-fold index lists for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Sorted test indices of each fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

fn members_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by.entry(y).or_default().push(i);
    }
    by
}

/// Stratified k-fold split. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes so fold sizes stay balanced.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    let by_class = members_by_class(labels);
    if let Some((&class, m)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class,
            count: m.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut members in by_class.into_values() {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(FoldPlan { k, seed, folds })
}

/// Hold out about `fraction` of each class, keeping at least one member of
/// every class in the training part. Returns sorted `(train, holdout)`.
pub fn stratified_holdout(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x686f_6c64);
    let (mut train, mut hold) = (Vec::new(), Vec::new());
    for mut members in members_by_class(labels).into_values() {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_hold = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        hold.extend_from_slice(&members[..n_hold]);
        train.extend_from_slice(&members[n_hold..]);
    }
    train.sort_unstable();
    hold.sort_unstable();
    (train, hold)
}
