//! Gated running covariance of projected chain coefficients.
//!
//! The estimator targets `S / (n - 1) + delta I` with
//! `S = sum_i (x_i - mean)(x_i - mean)^T`, maintained by the rank-1 update
//! `S += d (x - mean_new)^T` with `d = x - mean_old`, which reproduces the
//! batch formula exactly. States whose field norm reaches the threshold `R`
//! are skipped entirely; that gate is what the convergence argument needs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Covariance shape the estimator reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceStructure {
    /// The full `J x J` sample covariance.
    #[default]
    Full,
    /// Diagonal entries only; the baseline sampler uses this.
    Diagonal,
}

/// Running mean/scatter of gated coefficient samples plus the regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptState {
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
    delta_reg: f64,
    r_threshold: f64,
    structure: CovarianceStructure,
}

impl AdaptState {
    pub fn new(
        j_dim: usize,
        delta_reg: f64,
        r_threshold: f64,
        structure: CovarianceStructure,
    ) -> Result<Self> {
        if j_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "j_dim",
                reason: "adapted subspace must have dimension >= 1".into(),
            });
        }
        if delta_reg < 0.0 {
            return Err(Error::InvalidParameter {
                name: "delta_reg",
                reason: format!("must be non-negative, got {delta_reg}"),
            });
        }
        if !(r_threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_threshold",
                reason: format!("must be positive, got {r_threshold}"),
            });
        }
        Ok(Self {
            count: 0,
            mean: DVector::zeros(j_dim),
            scatter: DMatrix::zeros(j_dim, j_dim),
            delta_reg,
            r_threshold,
            structure,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of samples absorbed so far (gated samples not counted).
    pub fn absorbed(&self) -> usize {
        self.count
    }

    pub fn delta_reg(&self) -> f64 {
        self.delta_reg
    }

    pub fn r_threshold(&self) -> f64 {
        self.r_threshold
    }

    pub fn structure(&self) -> CovarianceStructure {
        self.structure
    }

    /// Absorbs one coefficient sample unless the field norm reaches `R`.
    pub fn update(&mut self, x_new: &[f64], u_norm: f64) {
        assert_eq!(x_new.len(), self.dim(), "coefficient dimension mismatch");
        if u_norm >= self.r_threshold {
            return;
        }
        self.count += 1;
        let x = DVector::from_column_slice(x_new);
        let delta_old = &x - &self.mean;
        self.mean += &delta_old / self.count as f64;
        let delta_new = &x - &self.mean;
        // scatter += delta_old * delta_new^T
        self.scatter.ger(1.0, &delta_old, &delta_new, 1.0);
    }

    /// Regularized covariance `scatter / (count - 1) + delta I`.
    ///
    /// Undefined (`None`) until two samples have been absorbed.
    pub fn sigma_hat(&self) -> Option<DMatrix<f64>> {
        if self.count < 2 {
            return None;
        }
        let denom = (self.count - 1) as f64;
        let j = self.dim();
        let mut sigma = match self.structure {
            CovarianceStructure::Full => {
                let mut s = self.scatter.clone() / denom;
                // The recursion keeps scatter symmetric up to round-off;
                // symmetrize so the Cholesky below never sees the drift.
                for a in 0..j {
                    for b in (a + 1)..j {
                        let avg = 0.5 * (s[(a, b)] + s[(b, a)]);
                        s[(a, b)] = avg;
                        s[(b, a)] = avg;
                    }
                }
                s
            }
            CovarianceStructure::Diagonal => {
                DMatrix::from_fn(j, j, |a, b| {
                    if a == b {
                        self.scatter[(a, a)] / denom
                    } else {
                        0.0
                    }
                })
            }
        };
        for a in 0..j {
            sigma[(a, a)] += self.delta_reg;
        }
        Some(sigma)
    }
}
