use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{streams, SelectError};
use crate::classifiers::TrainedModel;
use crate::features::FEATURE_NAMES;
use crate::rng::{derive_seed, derived_rng};

pub const DEFAULT_REPEATS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Importance {
    pub feature: usize,
    pub name: String,
    pub importance: f64,
}

pub(crate) fn feature_label(i: usize) -> String {
    FEATURE_NAMES.get(i).map_or_else(|| format!("f{i}"), |s| s.to_string())
}

fn correct(model: &TrainedModel, x: &[Vec<f64>], y: &[u8]) -> Result<usize, SelectError> {
    let mut n = 0;
    for (row, &label) in x.iter().zip(y) {
        if model.predict(row)? == label {
            n += 1;
        }
    }
    Ok(n)
}

/// Accuracy drop when one column is shuffled, averaged over `n_repeats`
/// independent shuffles, sorted by decreasing importance (ties by column).
///
/// Each (column, repeat) shuffle has its own derived generator, so results
/// do not depend on thread scheduling. The drop is formed from integer hit
/// counts, which makes it exactly zero whenever predictions are unchanged.
pub fn permutation_importance(
    model: &TrainedModel,
    x: &[Vec<f64>],
    y: &[u8],
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<Importance>, SelectError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(SelectError::EmptyEvaluation);
    }
    let n_repeats = n_repeats.max(1);
    let baseline = correct(model, x, y)?;
    let base = derive_seed(seed, streams::PERMUTE);
    let width = model.input_width;
    let mut out: Vec<Importance> = (0..width)
        .into_par_iter()
        .map(|j| {
            let total = if model.reads_feature(j) {
                let mut total = 0usize;
                let column: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let mut shuffled = x.to_vec();
                for rep in 0..n_repeats {
                    let mut perm = column.clone();
                    perm.shuffle(&mut derived_rng(derive_seed(base, j as u64), rep as u64));
                    for (row, v) in shuffled.iter_mut().zip(&perm) {
                        row[j] = *v;
                    }
                    total += correct(model, &shuffled, y)?;
                }
                total
            } else {
                baseline * n_repeats
            };
            let drop = (baseline * n_repeats) as f64 - total as f64;
            Ok(Importance {
                feature: j,
                name: feature_label(j),
                importance: drop / (x.len() * n_repeats) as f64,
            })
        })
        .collect::<Result<_, SelectError>>()?;
    out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.feature.cmp(&b.feature)));
    Ok(out)
}

/// Columns with strictly positive importance, ascending.
pub fn select_features(importances: &[Importance]) -> Result<Vec<usize>, SelectError> {
    let mut kept: Vec<usize> = importances
        .iter()
        .filter(|i| i.importance > 0.0)
        .map(|i| i.feature)
        .collect();
    if kept.is_empty() {
        return Err(SelectError::NoInformativeFeatures);
    }
    kept.sort_unstable();
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::HyperParams;
    use rand::Rng;

    fn label_copy_dataset(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = crate::rng::rng_for(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let mut row = vec![label as f64];
            row.extend((0..4).map(|_| rng.random::<f64>()));
            x.push(row);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn perfect_predictor_halves_accuracy() {
        let (x, y) = label_copy_dataset(400, 1);
        let model = TrainedModel::fit_all(&x, &y, &HyperParams::Dt { max_depth: 5, min_samples_split: 2 }, 0).unwrap();
        let (vx, vy) = label_copy_dataset(400, 2);
        let imp = permutation_importance(&model, &vx, &vy, 10, 9).unwrap();
        assert_eq!(imp[0].feature, 0);
        assert!((imp[0].importance - 0.5).abs() < 0.05, "{}", imp[0].importance);
        for other in &imp[1..] {
            // the tree splits once on column 0 and never reads the noise
            assert_eq!(other.importance, 0.0);
        }
        assert_eq!(select_features(&imp).unwrap(), vec![0]);
    }

    #[test]
    fn repeat_runs_identical() {
        let (x, y) = label_copy_dataset(100, 3);
        let mut noisy_y = y.clone();
        noisy_y[..10].iter_mut().for_each(|l| *l ^= 1);
        let model = TrainedModel::fit_all(&x, &noisy_y, &HyperParams::Knn {
            n_neighbors: 5,
            weights: crate::classifiers::KnnWeights::Uniform,
        }, 0)
        .unwrap();
        let a = permutation_importance(&model, &x, &y, 5, 4).unwrap();
        let b = permutation_importance(&model, &x, &y, 5, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].importance >= w[1].importance));
    }

    #[test]
    fn selection_rules() {
        let mk = |v: &[f64]| -> Vec<Importance> {
            v.iter()
                .enumerate()
                .map(|(i, &importance)| Importance { feature: i, name: feature_label(i), importance })
                .collect()
        };
        assert_eq!(select_features(&mk(&[0.1; 23])).unwrap().len(), 23);
        assert_eq!(select_features(&mk(&[0.0, 0.2, -0.01])).unwrap(), vec![1]);
        assert!(select_features(&mk(&[0.0, -0.1])).is_err());
    }
}
