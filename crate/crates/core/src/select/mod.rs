//! Train/validation splitting, cross-validated grid search, permutation
//! importance and evaluation reports.

mod grid;
mod importance;
mod report;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::classifiers::ModelError;
use crate::error::ErrorKind;
use crate::rng::{derive_seed, derived_rng};

pub use grid::{default_grid, grid_search, nb_smoothing_grid, CvRow, GridResult, GridSpec};
pub use importance::{permutation_importance, select_features, Importance, DEFAULT_REPEATS};
pub use report::{ClassMetrics, Confusion, EvalReport};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("class {class} has {count} rows; at least {needed} are required")]
    TooFewRows { class: u8, count: usize, needed: usize },
    #[error("cannot make {k} folds from {n} rows")]
    Folds { n: usize, k: usize },
    #[error("train_fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("candidate {candidate}: {source}")]
    Candidate {
        candidate: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no feature has positive importance")]
    NoInformativeFeatures,
    #[error("evaluation set is empty")]
    EmptyEvaluation,
}

impl SelectError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            SelectError::Model(e) | SelectError::Candidate { source: e, .. } => e.kind(),
            _ => ErrorKind::Contract,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed,
            stratified: true,
        }
    }
}

/// Generator streams derived from a user seed, one per purpose.
pub(crate) mod streams {
    pub const SPLIT: u64 = 0x5350_4c49_5400;
    pub const FOLDS: u64 = 0x464f_4c44_5300;
    pub const PERMUTE: u64 = 0x5045_524d_0000;
}

fn cut(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Splits row indices into (train, validation), both sorted ascending.
/// With `stratified`, each class is shuffled and cut separately so the
/// per-class train count is `round(fraction * class_size)`.
pub fn stratified_split(labels: &[u8], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>), SelectError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(SelectError::Fraction(spec.train_fraction));
    }
    let base = derive_seed(spec.seed, streams::SPLIT);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    if spec.stratified {
        for class in 0..2u8 {
            let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if rows.len() < 2 {
                return Err(SelectError::TooFewRows {
                    class,
                    count: rows.len(),
                    needed: 2,
                });
            }
            rows.shuffle(&mut derived_rng(base, class as u64));
            let k = cut(rows.len(), spec.train_fraction);
            train.extend_from_slice(&rows[..k]);
            valid.extend_from_slice(&rows[k..]);
        }
    } else {
        if labels.len() < 2 {
            return Err(SelectError::TooFewRows {
                class: 0,
                count: labels.len(),
                needed: 2,
            });
        }
        let mut rows: Vec<usize> = (0..labels.len()).collect();
        rows.shuffle(&mut derived_rng(base, 2));
        let k = cut(rows.len(), spec.train_fraction);
        train.extend_from_slice(&rows[..k]);
        valid.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok((train, valid))
}

/// Shuffled partition of `0..n` into `k` folds whose sizes differ by at
/// most one (the first `n % k` folds get the extra row).
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, SelectError> {
    if k < 2 || k > n {
        return Err(SelectError::Folds { n, k });
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut derived_rng(seed, streams::FOLDS));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = n / k + usize::from(i < n % k);
        let mut fold = rows[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Folds built by shuffling each class and dealing the rows round-robin,
/// class 0 first, so every fold sees both classes in proportion.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, SelectError> {
    if k < 2 || k > labels.len() {
        return Err(SelectError::Folds { n: labels.len(), k });
    }
    let mut order = Vec::with_capacity(labels.len());
    for class in 0..2u8 {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rows.shuffle(&mut derived_rng(derive_seed(seed, streams::FOLDS), class as u64));
        order.extend(rows);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, row) in order.into_iter().enumerate() {
        folds[pos % k].push(row);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_hundred_each() {
        let labels: Vec<u8> = (0..200).map(|i| u8::from(i >= 100)).collect();
        let (train, valid) = stratified_split(&labels, &SplitSpec::new(7)).unwrap();
        assert_eq!(train.len(), 140);
        assert_eq!(valid.len(), 60);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 70);
        assert_eq!(valid.iter().filter(|&&i| labels[i] == 1).count(), 30);
        let again = stratified_split(&labels, &SplitSpec::new(7)).unwrap();
        assert_eq!(again, (train.clone(), valid));
        let other = stratified_split(&labels, &SplitSpec::new(8)).unwrap();
        assert_ne!(other.0, train);
    }

    #[test]
    fn split_needs_two_per_class() {
        let labels = [0, 0, 0, 1];
        assert!(matches!(
            stratified_split(&labels, &SplitSpec::new(0)),
            Err(SelectError::TooFewRows { class: 1, count: 1, .. })
        ));
    }

    #[test]
    fn fold_sizes() {
        let sizes = |n, k| kfold_indices(n, k, 1).unwrap().iter().map(Vec::len).collect::<Vec<_>>();
        assert_eq!(sizes(9, 3), vec![3, 3, 3]);
        assert_eq!(sizes(10, 3), vec![4, 3, 3]);
        assert!(kfold_indices(2, 3, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_range(n in 2usize..200, k in 2usize..10, seed: u64) {
            prop_assume!(k <= n);
            let folds = kfold_indices(n, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let max = folds.iter().map(Vec::len).max().unwrap();
            let min = folds.iter().map(Vec::len).min().unwrap();
            prop_assert!(max - min <= 1);
        }

        #[test]
        fn stratified_folds_partition(n0 in 3usize..80, n1 in 3usize..80, seed: u64) {
            let labels: Vec<u8> = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
            let folds = stratified_folds(&labels, 3, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n0 + n1).collect::<Vec<_>>());
            for class in 0..2u8 {
                let counts: Vec<usize> = folds.iter()
                    .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                    .collect();
                prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn split_preserves_class_ratio(n0 in 2usize..300, n1 in 2usize..300, seed: u64) {
            let labels: Vec<u8> = (0..n0 + n1).map(|i| u8::from(i >= n0)).collect();
            let (train, valid) = stratified_split(&labels, &SplitSpec::new(seed)).unwrap();
            prop_assert_eq!(train.len() + valid.len(), n0 + n1);
            for (class, n) in [(0u8, n0), (1, n1)] {
                let t = train.iter().filter(|&&i| labels[i] == class).count();
                prop_assert!((t as f64 - 0.7 * n as f64).abs() < 1.0);
            }
        }
    }
}
