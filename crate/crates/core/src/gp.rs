//! Exact Gaussian-process regression with a zero prior mean.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{gram, gram_sym, KernelConfig};
use crate::linalg::cholesky_with_jitter;
use crate::matrix::RowMatrix;

/// Predictive mean and latent-function variance for a batch of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// Variance of the latent function value `f*` (no observation noise).
    pub var: Vec<f64>,
}

impl Prediction {
    /// Variances of noisy observations `y* = f* + eps`.
    pub fn observed_var(&self, noise_var: f64) -> Vec<f64> {
        self.var.iter().map(|v| v + noise_var).collect()
    }
}

pub(crate) fn check_width(expected: usize, x: &RowMatrix) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::Dimension {
            expected,
            actual: x.ncols(),
            context: "query width vs training width",
        });
    }
    Ok(())
}

pub(crate) fn check_training(x: &RowMatrix, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            actual: y.len(),
            context: "training targets vs rows",
        });
    }
    Ok(())
}

/// Posterior state of an exact GP.
#[derive(Debug, Clone)]
pub struct GpModel {
    train_inputs: RowMatrix,
    train_targets: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    weights: DVector<f64>,
    cfg: KernelConfig,
    jitter: f64,
}

impl GpModel {
    /// Factors `K + noise_var I + jitter I` and solves for the weights
    /// `(K + noise_var I)^-1 y`.
    pub fn fit(x: &RowMatrix, y: &[f64], cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        check_training(x, y)?;
        let mut k = gram_sym(x, cfg);
        for i in 0..k.nrows() {
            k[(i, i)] += cfg.noise_var;
        }
        let (chol, jitter) = cholesky_with_jitter(&k, cfg.jitter, "K_XX + noise")?;
        let targets = DVector::from_column_slice(y);
        let weights = chol.solve(&targets);
        Ok(Self {
            train_inputs: x.clone(),
            train_targets: targets,
            chol,
            weights,
            cfg: *cfg,
            jitter,
        })
    }

    pub fn predict(&self, xstar: &RowMatrix) -> Result<Prediction> {
        check_width(self.train_inputs.ncols(), xstar)?;
        let kxs = gram(&self.train_inputs, xstar, &self.cfg)?;
        let mean = kxs.tr_mul(&self.weights);
        let v = self.chol.l_dirty().solve_lower_triangular(&kxs).expect("nonsingular factor");
        let var = v
            .column_iter()
            .map(|c| (1.0 - c.norm_squared()).max(f64::MIN_POSITIVE))
            .collect();
        Ok(Prediction {
            mean: mean.iter().copied().collect(),
            var,
        })
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn input_width(&self) -> usize {
        self.train_inputs.ncols()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn inputs(&self) -> &RowMatrix {
        &self.train_inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.train_targets
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    /// Jitter actually applied after escalation.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular Cholesky factor.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::oracles::dense_gp_oracle;

    fn random_instance(seed: u64, n: usize, w: usize) -> (RowMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * w).map(|_| rng.random_range(-100.0..-30.0)).collect();
        let y = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        (RowMatrix::new(n, w, data).unwrap(), y)
    }

    #[test]
    fn single_point_weights() {
        let x = RowMatrix::from_rows(&[[-60.0, -70.0]]).unwrap();
        let cfg = KernelConfig { jitter: 0.0, ..Default::default() };
        let m = GpModel::fit(&x, &[2.0], &cfg).unwrap();
        assert!((m.weights()[0] - 1.0).abs() < 1e-15);
        let p = m.predict(&x).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-15);
        assert!((p.var[0] - 0.5).abs() < 1e-15);
        assert!((p.observed_var(1.0)[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn duplicate_rows_fit() {
        let x = RowMatrix::from_rows(&[[-60.0, -70.0], [-60.0, -70.0], [-80.0, -40.0]]).unwrap();
        let cfg = KernelConfig { noise_var: 0.0, ..Default::default() };
        let m = GpModel::fit(&x, &[1.0, 1.0, 3.0], &cfg).unwrap();
        assert!(m.jitter() >= 1e-8);
    }

    #[test]
    fn factor_reconstructs_and_weights_solve() {
        let (x, y) = random_instance(11, 64, 6);
        let cfg = KernelConfig::default();
        let m = GpModel::fit(&x, &y, &cfg).unwrap();
        let mut a = gram_sym(&x, &cfg);
        for i in 0..64 {
            a[(i, i)] += cfg.noise_var + m.jitter();
        }
        let l = m.factor();
        let rec = &l * l.transpose();
        assert!((&rec - &a).norm() / a.norm() < 1e-6);

        let mut k_noise = gram_sym(&x, &cfg);
        for i in 0..64 {
            k_noise[(i, i)] += cfg.noise_var;
        }
        let resid = &k_noise * m.weights() - DVector::from_column_slice(&y);
        assert!(resid.norm() / y.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
    }

    #[test]
    fn matches_dense_oracle() {
        let (x, y) = random_instance(5, 50, 8);
        let (xs, _) = random_instance(6, 10, 8);
        let cfg = KernelConfig::default();
        let p = GpModel::fit(&x, &y, &cfg).unwrap().predict(&xs).unwrap();
        let (om, ov) = dense_gp_oracle(&x, &y, &xs, &cfg).unwrap();
        for i in 0..10 {
            assert!((p.mean[i] - om[i]).abs() <= 1e-8 * om[i].abs().max(1e-3));
            assert!((p.var[i] - ov[i]).abs() <= 1e-8 * ov[i].abs());
        }
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let (x, y) = random_instance(2, 20, 4);
        let m = GpModel::fit(&x, &y, &KernelConfig::default()).unwrap();
        let far = RowMatrix::from_rows(&[[5000.0; 4]]).unwrap();
        let p = m.predict(&far).unwrap();
        assert!(p.mean[0].abs() < 1e-6);
        assert!((p.var[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn interpolates_without_noise() {
        let (x, y) = random_instance(3, 30, 5);
        let cfg = KernelConfig { noise_var: 0.0, jitter: 1e-10, ..Default::default() };
        let p = GpModel::fit(&x, &y, &cfg).unwrap().predict(&x).unwrap();
        for i in 0..30 {
            assert!((p.mean[i] - y[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn variance_lower_at_training_points() {
        let (x, y) = random_instance(4, 30, 5);
        let m = GpModel::fit(&x, &y, &KernelConfig::default()).unwrap();
        let at = m.predict(&x.select_rows(&[0])).unwrap().var[0];
        let far = m.predict(&RowMatrix::from_rows(&[[500.0; 5]]).unwrap()).unwrap().var[0];
        assert!(at < far);
    }

    #[test]
    fn permutation_invariance() {
        let (x, y) = random_instance(8, 40, 5);
        let (xs, _) = random_instance(9, 7, 5);
        let cfg = KernelConfig::default();
        let p1 = GpModel::fit(&x, &y, &cfg).unwrap().predict(&xs).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let p2 = GpModel::fit(&x.select_rows(&perm), &yp, &cfg).unwrap().predict(&xs).unwrap();
        for i in 0..7 {
            assert!((p1.mean[i] - p2.mean[i]).abs() < 1e-10);
            assert!((p1.var[i] - p2.var[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn errors() {
        let x = RowMatrix::from_rows(&[[-60.0, -70.0]]).unwrap();
        assert!(GpModel::fit(&x, &[1.0, 2.0], &KernelConfig::default()).is_err());
        assert!(GpModel::fit(&RowMatrix::zeros(0, 2), &[], &KernelConfig::default()).is_err());
        let m = GpModel::fit(&x, &[1.0], &KernelConfig::default()).unwrap();
        assert!(matches!(
            m.predict(&RowMatrix::zeros(1, 3)),
            Err(Error::Dimension { .. })
        ));
    }
}
