use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_training_set, fit_scaler, ModelError, StandardScaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnWeights {
    Uniform,
    Distance,
}

impl KnnWeights {
    pub fn as_str(self) -> &'static str {
        match self {
            KnnWeights::Uniform => "uniform",
            KnnWeights::Distance => "distance",
        }
    }
}

impl fmt::Display for KnnWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KnnWeights {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(KnnWeights::Uniform),
            "distance" => Ok(KnnWeights::Distance),
            other => Err(format!("unknown kNN weighting {other:?}")),
        }
    }
}

/// Brute-force Euclidean kNN over the standardized training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub k: usize,
    pub weights: KnnWeights,
    pub scaler: StandardScaler,
}

pub fn train_knn(x: &[Vec<f64>], y: &[u8], k: usize, weights: KnnWeights) -> Result<KnnModel, ModelError> {
    check_training_set(x, y)?;
    if k == 0 || k > x.len() {
        return Err(ModelError::InvalidParams(format!(
            "n_neighbors={k} must be in 1..={}",
            x.len()
        )));
    }
    let scaler = fit_scaler(x)?;
    Ok(KnnModel {
        points: scaler.transform(x),
        labels: y.to_vec(),
        k,
        weights,
        scaler,
    })
}

/// Winner of a two-class vote; ties go to class 0.
fn vote(score0: f64, score1: f64) -> u8 {
    u8::from(score1 > score0)
}

impl KnnModel {
    /// The `k` nearest training rows as `(distance, label)`, nearest first;
    /// equal distances are ordered by training row index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<(f64, u8)> {
        let q = self.scaler.transform_row(row);
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        let k = self.k;
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.truncate(k);
        }
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dists.into_iter().map(|(d, i)| (d, self.labels[i])).collect()
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let nn = self.neighbors(row);
        let mut score = [0.0f64; 2];
        match self.weights {
            KnnWeights::Uniform => {
                for &(_, l) in &nn {
                    score[l as usize] += 1.0;
                }
            }
            KnnWeights::Distance => {
                let exact: Vec<u8> = nn.iter().filter(|(d, _)| *d == 0.0).map(|n| n.1).collect();
                if !exact.is_empty() {
                    for l in exact {
                        score[l as usize] += 1.0;
                    }
                } else {
                    for &(d, l) in &nn {
                        score[l as usize] += 1.0 / d;
                    }
                }
            }
        }
        vote(score[0], score[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_point_k1() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.5]];
        let y = vec![0, 1, 0];
        let m = train_knn(&x, &y, 1, KnnWeights::Uniform).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(m.predict(row), label);
        }
    }

    #[test]
    fn majority_of_three() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let y = vec![1, 1, 0, 0];
        let m = train_knn(&x, &y, 3, KnnWeights::Uniform).unwrap();
        assert_eq!(m.predict(&[1.0]), 1);
    }

    #[test]
    fn uniform_tie_goes_to_zero() {
        let x = vec![vec![0.0], vec![2.0]];
        let y = vec![1, 0];
        let m = train_knn(&x, &y, 2, KnnWeights::Uniform).unwrap();
        assert_eq!(m.predict(&[0.1]), 0);
    }

    #[test]
    fn distance_weighting_brute_force() {
        // Scaler on x = {0,1,2,3,10}: mean 3.2, population std sqrt(12.56)
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![10.0]];
        let y = vec![0, 1, 1, 0, 0];
        let m = train_knn(&x, &y, 3, KnnWeights::Distance).unwrap();
        let sd = 12.56f64.sqrt();
        // query 0.4: nearest raw distances 0.4 (label 0), 0.6 (1), 1.6 (1)
        // weights: class0 = sd/0.4 = 2.5 sd, class1 = sd/0.6 + sd/1.6 = 2.2917 sd
        let w0 = sd / 0.4;
        let w1 = sd / 0.6 + sd / 1.6;
        assert!(w0 > w1);
        assert_eq!(m.predict(&[0.4]), 0);
        // query 0.6: 0.4 (1), 0.6 (0), 1.4 (1) -> class1 = 2.5+0.714 > class0 = 1.667
        assert_eq!(m.predict(&[0.6]), 1);
        // uniform voting would say 1 for 0.4 (two of three are class 1)
        let u = train_knn(&x, &y, 3, KnnWeights::Uniform).unwrap();
        assert_eq!(u.predict(&[0.4]), 1);
    }

    #[test]
    fn exact_match_dominates() {
        let x = vec![vec![0.0], vec![0.01], vec![0.02]];
        let y = vec![0, 1, 1];
        let m = train_knn(&x, &y, 3, KnnWeights::Distance).unwrap();
        assert_eq!(m.predict(&[0.0]), 0);
    }

    #[test]
    fn k_larger_than_training_set() {
        assert!(train_knn(&[vec![0.0]], &[0], 2, KnnWeights::Uniform).is_err());
    }
}
