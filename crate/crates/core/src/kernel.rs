//! Rational Quadratic kernel and Gram-matrix construction.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Hyperparameters shared by the exact and sparse regressors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    /// Scale-mixture parameter of the Rational Quadratic kernel.
    pub alpha: f64,
    /// Length scale in dBm.
    pub length_scale: f64,
    /// Observation noise variance added to the training covariance.
    pub noise_var: f64,
    /// Diagonal stabilizer added before each Cholesky factorization.
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            length_scale: 10.0,
            noise_var: 1.0,
            jitter: 1e-8,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.length_scale > 0.0
            && self.noise_var >= 0.0
            && self.jitter >= 0.0
            && [self.alpha, self.length_scale, self.noise_var, self.jitter]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "kernel requires alpha > 0, length_scale > 0, noise_var >= 0, jitter >= 0; got {self:?}"
            )))
        }
    }

    /// Kernel value for a given squared Euclidean distance.
    #[inline]
    pub fn eval_sq_dist(&self, sq_dist: f64) -> f64 {
        (1.0 + sq_dist / (2.0 * self.alpha * self.length_scale * self.length_scale)).powf(-self.alpha)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// `k(a, b) = (1 + |a - b|^2 / (2 alpha l^2))^(-alpha)`.
pub fn ratquad(a: &[f64], b: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
            context: "kernel input length",
        });
    }
    Ok(cfg.eval_sq_dist(sq_dist(a, b)))
}

/// Cross-covariance matrix with entry `(i, j) = k(a_i, b_j)`.
///
/// Rows are computed in parallel; every entry is produced by the same scalar
/// code path so the result does not depend on the thread schedule.
pub fn gram(a: &RowMatrix, b: &RowMatrix, cfg: &KernelConfig) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            actual: b.ncols(),
            context: "Gram input width",
        });
    }
    let (n, m) = (a.nrows(), b.nrows());
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            (0..m).map(|j| cfg.eval_sq_dist(sq_dist(ai, b.row(j)))).collect()
        })
        .collect();
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Symmetric Gram matrix of `a` with itself; only the upper triangle is
/// evaluated and the diagonal is exactly one.
pub fn gram_sym(a: &RowMatrix, cfg: &KernelConfig) -> DMatrix<f64> {
    let n = a.nrows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a.row(i);
            (i + 1..n).map(|j| cfg.eval_sq_dist(sq_dist(ai, a.row(j)))).collect()
        })
        .collect();
    let mut k = DMatrix::identity(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
