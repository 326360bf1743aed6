use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, FeatureBag};
use super::{check_training_set, DecisionTree, ModelError, TreeParams};
use crate::rng::derived_rng;

/// Knobs beyond the public hyperparameters. Turning `bootstrap` off also
/// turns off per-split feature sampling, which makes a one-tree forest
/// identical to a plain CART tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestOptions {
    pub bootstrap: bool,
    /// Features drawn per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestOptions {
    fn default() -> Self {
        ForestOptions {
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Generator stream of tree `i` is `derive_seed(seed, i)`.
    pub seed: u64,
    pub options: ForestOptions,
    pub max_features: usize,
    /// Training-row multiplicity drawn for each tree (empty when bootstrap
    /// is off).
    pub bags: Vec<Vec<u32>>,
}

fn default_max_features(width: usize) -> usize {
    ((width as f64).sqrt().ceil() as usize).max(1)
}

pub fn train_forest(
    x: &[Vec<f64>],
    y: &[u8],
    n_estimators: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<RandomForest, ModelError> {
    train_forest_with(x, y, n_estimators, params, seed, ForestOptions::default())
}

pub fn train_forest_with(
    x: &[Vec<f64>],
    y: &[u8],
    n_estimators: usize,
    params: &TreeParams,
    seed: u64,
    options: ForestOptions,
) -> Result<RandomForest, ModelError> {
    let width = check_training_set(x, y)?;
    if n_estimators == 0 {
        return Err(ModelError::InvalidParams("n_estimators must be >= 1".into()));
    }
    if params.max_depth < 1 || params.min_samples_split < 2 {
        return Err(ModelError::InvalidParams(
            "max_depth must be >= 1 and min_samples_split >= 2".into(),
        ));
    }
    let max_features = options.max_features.unwrap_or_else(|| default_max_features(width));
    let n = x.len();
    let grown: Vec<(DecisionTree, Vec<u32>)> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = derived_rng(seed, t as u64);
            if !options.bootstrap {
                let tree = grow_tree::<rand_chacha::ChaCha8Rng>(x, y, (0..n).collect(), params, None);
                return (tree, Vec::new());
            }
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut bag = vec![0u32; n];
            for &r in &rows {
                bag[r] += 1;
            }
            let feature_bag = FeatureBag {
                rng: &mut rng,
                max_features,
            };
            (grow_tree(x, y, rows, params, Some(feature_bag)), bag)
        })
        .collect();
    let (trees, bags): (Vec<_>, Vec<_>) = grown.into_iter().unzip();
    let bags = if options.bootstrap { bags } else { Vec::new() };
    Ok(RandomForest {
        trees,
        seed,
        options,
        max_features,
        bags,
    })
}

impl RandomForest {
    /// Majority vote; ties go to class 0.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict(row) == 1).count();
        u8::from(2 * ones > self.trees.len())
    }
}
