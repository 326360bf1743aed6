use serde::{Deserialize, Serialize};

use super::{check_training_set, ModelError};

/// Gaussian naive Bayes. Every per-class variance is inflated by
/// `var_smoothing * max_j Var(x_j)`, where the variance is taken over all
/// training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Smoothed variances.
    pub variances: [Vec<f64>; 2],
    pub epsilon: f64,
}

fn column_moments(rows: &[&Vec<f64>], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

pub fn train_gnb(x: &[Vec<f64>], y: &[u8], var_smoothing: f64) -> Result<GaussianNb, ModelError> {
    let width = check_training_set(x, y)?;
    if !(var_smoothing > 0.0) {
        return Err(ModelError::InvalidParams("var_smoothing must be > 0".into()));
    }
    let all: Vec<&Vec<f64>> = x.iter().collect();
    let (_, total_var) = column_moments(&all, width);
    let max_var = total_var.iter().copied().fold(0.0, f64::max);
    // all-constant data would leave zero variances; fall back to the raw knob
    let epsilon = var_smoothing * if max_var > 0.0 { max_var } else { 1.0 };

    let mut priors = [0.0; 2];
    let mut means: [Vec<f64>; 2] = Default::default();
    let mut variances: [Vec<f64>; 2] = Default::default();
    for class in 0..2u8 {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == class).map(|(r, _)| r).collect();
        if rows.is_empty() {
            return Err(ModelError::MissingClass(class));
        }
        let (m, v) = column_moments(&rows, width);
        priors[class as usize] = rows.len() as f64 / x.len() as f64;
        means[class as usize] = m;
        variances[class as usize] = v.into_iter().map(|s| s + epsilon).collect();
    }
    Ok(GaussianNb {
        priors,
        means,
        variances,
        epsilon,
    })
}

impl GaussianNb {
    /// Unnormalized log-posterior of each class.
    pub fn log_posteriors(&self, row: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut s = self.priors[c].ln();
            for ((v, m), var) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                s -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / (2.0 * var);
            }
            *slot = s;
        }
        out
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let lp = self.log_posteriors(row);
        u8::from(lp[1] > lp[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_boundary_at_zero() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for v in [-3.0, -2.0, -1.0] {
            x.push(vec![v]);
            y.push(0);
            x.push(vec![-v]);
            y.push(1);
        }
        let m = train_gnb(&x, &y, 1e-9).unwrap();
        assert_eq!(m.predict(&[-0.01]), 0);
        assert_eq!(m.predict(&[0.01]), 1);
        assert_eq!(m.predict(&[-2.0]), 0);
        assert_eq!(m.predict(&[2.0]), 1);
        assert!((m.priors[0] + m.priors[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eight_point_formula_oracle() {
        // class 0: (1,2) (2,1) (3,3) (2,2); class 1: (6,5) (7,7) (5,6) (6,6)
        let x = vec![
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![3.0, 3.0],
            vec![2.0, 2.0],
            vec![6.0, 5.0],
            vec![7.0, 7.0],
            vec![5.0, 6.0],
            vec![6.0, 6.0],
        ];
        let y = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let m = train_gnb(&x, &y, 0.01).unwrap();
        // Total variances: col0 mean 4, Σd² = 9+4+1+4+4+9+1+4 = 36 -> 4.5;
        // col1 mean 4, Σd² = 4+9+1+4+1+9+4+4 = 36 -> 4.5. epsilon = 0.045.
        // Per class (both columns, both classes): Σd² = 2 over 4 rows -> 0.5.
        assert!((m.epsilon - 0.045).abs() < 1e-15);
        let var = 0.5 + 0.045;
        let q = [4.0, 3.5];
        let gauss = |v: f64, mu: f64| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - mu).powi(2) / (2.0 * var);
        let lp0 = 0.5f64.ln() + gauss(q[0], 2.0) + gauss(q[1], 2.0);
        let lp1 = 0.5f64.ln() + gauss(q[0], 6.0) + gauss(q[1], 6.0);
        let got = m.log_posteriors(&q);
        assert!((got[0] - lp0).abs() < 1e-9, "{} vs {lp0}", got[0]);
        assert!((got[1] - lp1).abs() < 1e-9, "{} vs {lp1}", got[1]);
        assert_eq!(m.predict(&q), 0);
        assert_eq!(m.means[1], vec![6.0, 6.0]);
    }

    #[test]
    fn query_at_class_mean() {
        let x = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let m = train_gnb(&x, &[0, 0, 1, 1], 1e-9).unwrap();
        assert_eq!(m.predict(&[0.5]), 0);
        assert_eq!(m.predict(&[10.5]), 1);
    }

    #[test]
    fn missing_class() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_gnb(&x, &[1, 1], 1e-9), Err(ModelError::MissingClass(0))));
    }

    #[test]
    fn exact_tie_goes_to_zero() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = train_gnb(&x, &[0, 1], 1.0).unwrap();
        assert_eq!(m.predict(&[0.0]), 0);
    }
}
