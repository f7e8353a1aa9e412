//! Sparse GP regression with inducing inputs, FITC approximation.
//!
//! With `D = diag(lambda) + noise_var I`, where
//! `lambda_i = k(x_i, x_i) - k_i^T K_ZZ^-1 k_i`, training forms
//!
//! ```text
//! Q_ZZ = K_ZZ + K_ZX D^-1 K_XZ
//! w    = Q_ZZ^-1 K_ZX D^-1 y
//! ```
//!
//! and prediction at `x*` with `k* = k(Z, x*)` is
//!
//! ```text
//! mean = k*^T w
//! var  = k(x*, x*) - k*^T (K_ZZ^-1 - Q_ZZ^-1) k*
//! ```
//!
//! When `Z = X` the diagonal correction vanishes and the model reproduces the
//! exact GP.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::gp::{check_training, check_width, Prediction};
use crate::kernel::{gram, gram_sym, KernelConfig};
use crate::linalg::cholesky_with_jitter;
use crate::matrix::RowMatrix;

/// Values of lambda below zero but above this are rounding noise.
pub const LAMBDA_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SgpModel {
    inducing: RowMatrix,
    kzz_chol: Cholesky<f64, Dyn>,
    qzz_chol: Cholesky<f64, Dyn>,
    lambda: Vec<f64>,
    pred_weights: DVector<f64>,
    cfg: KernelConfig,
    n_train: usize,
    kzz_jitter: f64,
}

impl SgpModel {
    pub fn fit(x: &RowMatrix, y: &[f64], z: &RowMatrix, cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        check_training(x, y)?;
        let (n, m) = (x.nrows(), z.nrows());
        if m == 0 {
            return Err(Error::Empty("inducing set"));
        }
        if m > n {
            return Err(Error::Config(format!(
                "{m} inducing points exceed {n} training rows"
            )));
        }
        check_width(x.ncols(), z)?;

        let kzz = gram_sym(z, cfg);
        let (kzz_chol, kzz_jitter) = cholesky_with_jitter(&kzz, cfg.jitter, "K_ZZ")?;
        let kzx = gram(z, x, cfg)?;
        let v = kzz_chol
            .l_dirty()
            .solve_lower_triangular(&kzx)
            .expect("nonsingular factor");

        let mut lambda = Vec::with_capacity(n);
        let mut inv_d = Vec::with_capacity(n);
        for col in v.column_iter() {
            let raw = 1.0 - col.norm_squared();
            if raw < -LAMBDA_TOLERANCE {
                log::debug!("lambda {raw:e} below tolerance, clamping to 0");
            }
            let l = raw.max(0.0);
            lambda.push(l);
            inv_d.push(1.0 / (l + cfg.noise_var).max(f64::EPSILON));
        }

        // K_ZX D^-1/2, so that Q_ZZ = K_ZZ + B B^T
        let mut b = kzx.clone();
        for (j, mut col) in b.column_iter_mut().enumerate() {
            col *= inv_d[j].sqrt();
        }
        let mut qzz = &b * b.transpose();
        qzz += &kzz;
        for i in 0..m {
            qzz[(i, i)] += kzz_jitter;
        }
        let (qzz_chol, _) = cholesky_with_jitter(&qzz, 0.0, "Q_ZZ")?;

        let dy = DVector::from_iterator(n, y.iter().zip(&inv_d).map(|(t, d)| t * d));
        let pred_weights = qzz_chol.solve(&(&kzx * dy));

        Ok(Self {
            inducing: z.clone(),
            kzz_chol,
            qzz_chol,
            lambda,
            pred_weights,
            cfg: *cfg,
            n_train: n,
            kzz_jitter,
        })
    }

    pub fn predict(&self, xstar: &RowMatrix) -> Result<Prediction> {
        check_width(self.inducing.ncols(), xstar)?;
        let kzs = gram(&self.inducing, xstar, &self.cfg)?;
        let mean = kzs.tr_mul(&self.pred_weights);
        let a = self
            .kzz_chol
            .l_dirty()
            .solve_lower_triangular(&kzs)
            .expect("nonsingular factor");
        let c = self
            .qzz_chol
            .l_dirty()
            .solve_lower_triangular(&kzs)
            .expect("nonsingular factor");
        let var = a
            .column_iter()
            .zip(c.column_iter())
            .map(|(ai, ci)| (1.0 - ai.norm_squared() + ci.norm_squared()).max(f64::MIN_POSITIVE))
            .collect();
        Ok(Prediction {
            mean: mean.iter().copied().collect(),
            var,
        })
    }

    /// Inducing-set size relative to the training set, in percent.
    pub fn sparsity(&self) -> f64 {
        100.0 * self.inducing.nrows() as f64 / self.n_train as f64
    }

    pub fn n_inducing(&self) -> usize {
        self.inducing.nrows()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn input_width(&self) -> usize {
        self.inducing.ncols()
    }

    pub fn inducing(&self) -> &RowMatrix {
        &self.inducing
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn pred_weights(&self) -> &DVector<f64> {
        &self.pred_weights
    }

    pub fn config(&self) -> &KernelConfig {
        &self.cfg
    }

    /// Jitter applied to `K_ZZ` after escalation.
    pub fn kzz_jitter(&self) -> f64 {
        self.kzz_jitter
    }

    /// `Q_ZZ` rebuilt from its Cholesky factor.
    pub fn qzz(&self) -> DMatrix<f64> {
        let l = self.qzz_chol.l();
        &l * l.transpose()
    }
}
