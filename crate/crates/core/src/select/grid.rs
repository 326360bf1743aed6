use rayon::prelude::*;
use serde::Serialize;

use super::{stratified_folds, SelectError};
use crate::classifiers::{Family, HyperParams, KnnWeights, TrainedModel};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub family: Family,
    pub candidates: Vec<HyperParams>,
    pub cv_folds: usize,
}

impl GridSpec {
    pub fn for_family(family: Family) -> Self {
        GridSpec {
            family,
            candidates: default_grid(family),
            cv_folds: 3,
        }
    }
}

/// `10^e` for `e` evenly spaced from 0 down to -9, 100 values.
pub fn nb_smoothing_grid() -> Vec<f64> {
    const NUM: usize = 100;
    let step = -9.0 / (NUM - 1) as f64;
    (0..NUM)
        .map(|i| {
            let e = if i == NUM - 1 { -9.0 } else { i as f64 * step };
            10f64.powf(e)
        })
        .collect()
}

/// Candidate list per family. Parameter names are sorted and the first
/// name varies slowest, so candidate order is stable and documented.
pub fn default_grid(family: Family) -> Vec<HyperParams> {
    let splits = [5usize, 8];
    let depths = [5usize, 10];
    match family {
        Family::Lr => [0.1, 1.0]
            .iter()
            .flat_map(|&c| {
                ["liblinear", "saga"].map(|s| HyperParams::Lr {
                    c,
                    solver: s.to_string(),
                })
            })
            .collect(),
        Family::Knn => [5usize, 10]
            .iter()
            .flat_map(|&k| {
                [KnnWeights::Uniform, KnnWeights::Distance].map(|w| HyperParams::Knn {
                    n_neighbors: k,
                    weights: w,
                })
            })
            .collect(),
        Family::Dt => depths
            .iter()
            .flat_map(|&d| {
                splits.map(|s| HyperParams::Dt {
                    max_depth: d,
                    min_samples_split: s,
                })
            })
            .collect(),
        Family::Rf => {
            let mut out = Vec::new();
            for d in depths {
                for s in splits {
                    for n in [5usize, 20, 50] {
                        out.push(HyperParams::Rf {
                            n_estimators: n,
                            max_depth: d,
                            min_samples_split: s,
                        });
                    }
                }
            }
            out
        }
        Family::Nb => nb_smoothing_grid()
            .into_iter()
            .map(|v| HyperParams::Nb { var_smoothing: v })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvRow {
    pub params: HyperParams,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub table: Vec<CvRow>,
    pub best_index: usize,
    /// Best candidate refit on every training row.
    pub model: TrainedModel,
}

impl GridResult {
    pub fn best(&self) -> &CvRow {
        &self.table[self.best_index]
    }
}

fn accuracy(model: &TrainedModel, x: &[Vec<f64>], y: &[u8], rows: &[usize]) -> Result<f64, SelectError> {
    let mut correct = 0usize;
    for &i in rows {
        if model.predict(&x[i])? == y[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Exhaustive k-fold search over `grid.candidates` on the given training
/// rows. The winner has the highest mean fold accuracy; ties go to the
/// earliest candidate.
pub fn grid_search(x: &[Vec<f64>], y: &[u8], grid: &GridSpec, seed: u64) -> Result<GridResult, SelectError> {
    if grid.candidates.is_empty() {
        return Err(SelectError::EmptyGrid);
    }
    let folds = stratified_folds(y, grid.cv_folds, seed)?;
    let fold_sets: Vec<(Vec<usize>, &Vec<usize>)> = folds
        .iter()
        .enumerate()
        .map(|(i, held)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (train, held)
        })
        .collect();

    let table: Vec<CvRow> = grid
        .candidates
        .par_iter()
        .map(|params| {
            let annotate = |e: crate::classifiers::ModelError| SelectError::Candidate {
                candidate: params.describe(),
                source: e,
            };
            let mut scores = Vec::with_capacity(fold_sets.len());
            for (train, held) in &fold_sets {
                let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
                let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
                let model = TrainedModel::fit_all(&tx, &ty, params, seed).map_err(annotate)?;
                scores.push(accuracy(&model, x, y, held)?);
            }
            let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;
            Ok(CvRow {
                params: params.clone(),
                fold_scores: scores,
                mean_score,
            })
        })
        .collect::<Result<_, SelectError>>()?;

    let mut best_index = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_score > table[best_index].mean_score {
            best_index = i;
        }
    }
    let model = TrainedModel::fit_all(x, y, &table[best_index].params, seed).map_err(|e| SelectError::Candidate {
        candidate: table[best_index].params.describe(),
        source: e,
    })?;
    Ok(GridResult {
        table,
        best_index,
        model,
    })
}
