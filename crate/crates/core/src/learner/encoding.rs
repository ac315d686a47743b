//! Instance-strategy tokens: `[theta | tight-row indicator | integer values]`,
//! standardized with statistics from the training set.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::model::{Strategy, StrategyLibrary};

/// Floor on a feature's standard deviation.
pub const STD_GUARD: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenEncoder {
    pub theta_dim: usize,
    pub m: usize,
    pub d: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TokenEncoder {
    pub fn features(&self) -> usize {
        self.theta_dim + self.m + self.d
    }

    /// Unstandardized feature vector of `<theta, s>`.
    pub fn raw(theta_dim: usize, m: usize, d: usize, theta: &[f64], s: &Strategy) -> Vec<f64> {
        let mut f = vec![0.0; theta_dim + m + d];
        f[..theta_dim].copy_from_slice(&theta[..theta_dim]);
        for &i in &s.tight_set {
            f[theta_dim + i] = 1.0;
        }
        for (k, &v) in s.integer_values.iter().enumerate() {
            f[theta_dim + m + k] = v as f64;
        }
        f
    }

    /// Fits per-feature mean and standard deviation over every `(theta, s)` pair.
    pub fn fit(m: usize, d: usize, thetas: &[Vec<f64>], library: &StrategyLibrary) -> Self {
        let theta_dim = thetas.first().map_or(0, Vec::len);
        let f = theta_dim + m + d;
        let count = (thetas.len() * library.len()).max(1) as f64;
        let mut mean = vec![0.0; f];
        for theta in thetas {
            for s in library.strategies() {
                for (k, v) in Self::raw(theta_dim, m, d, theta, s).into_iter().enumerate() {
                    mean[k] += v;
                }
            }
        }
        mean.iter_mut().for_each(|v| *v /= count);
        let mut var = vec![0.0; f];
        for theta in thetas {
            for s in library.strategies() {
                for (k, v) in Self::raw(theta_dim, m, d, theta, s).into_iter().enumerate() {
                    var[k] += (v - mean[k]) * (v - mean[k]);
                }
            }
        }
        let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
        Self { theta_dim, m, d, mean, std }
    }

    pub fn encode(&self, theta: &[f64], s: &Strategy) -> Vec<f64> {
        Self::raw(self.theta_dim, self.m, self.d, theta, s)
            .into_iter()
            .enumerate()
            .map(|(k, v)| if self.std[k] < STD_GUARD { 0.0 } else { (v - self.mean[k]) / self.std[k] })
            .collect()
    }

    /// Token matrix with one row per library strategy.
    pub fn encode_batch(&self, theta: &[f64], library: &StrategyLibrary) -> Array2<f64> {
        let f = self.features();
        let mut out = Array2::zeros((library.len(), f));
        for (mut row, s) in out.axis_iter_mut(Axis(0)).zip(library.strategies()) {
            for (dst, v) in row.iter_mut().zip(self.encode(theta, s)) {
                *dst = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn library() -> StrategyLibrary {
        let mut lib = StrategyLibrary::new_raw();
        lib.insert(Strategy::new(vec![0, 2], vec![1]));
        lib.insert(Strategy::new(vec![0, 2, 3], vec![1]));
        lib.insert(Strategy::new(vec![1], vec![0]));
        lib
    }

    #[test]
    fn training_features_are_standardized() {
        let thetas = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![4.0, 5.0]];
        let lib = library();
        let enc = TokenEncoder::fit(4, 1, &thetas, &lib);
        assert_eq!(enc.features(), 7);
        let rows: Vec<Vec<f64>> = thetas.iter().flat_map(|t| lib.strategies().iter().map(|s| enc.encode(t, s))).collect();
        let n = rows.len() as f64;
        for k in 0..7 {
            let mean: f64 = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var: f64 = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            if enc.std[k] < STD_GUARD {
                assert!(rows.iter().all(|r| r[k] == 0.0));
            } else {
                assert!((var.sqrt() - 1.0).abs() < 1e-6);
            }
        }
        assert!(enc.std[1] < STD_GUARD);
    }

    #[test]
    fn one_tight_index_changes_one_coordinate() {
        let thetas = vec![vec![1.0], vec![3.0]];
        let lib = library();
        let enc = TokenEncoder::fit(4, 1, &thetas, &lib);
        let a = enc.encode(&thetas[0], lib.get(0));
        let b = enc.encode(&thetas[0], lib.get(1));
        let differing: Vec<usize> = (0..a.len()).filter(|&k| a[k] != b[k]).collect();
        assert_eq!(differing, vec![1 + 3]);
        assert_eq!(enc.encode_batch(&thetas[0], &lib).nrows(), 3);
    }
}
