//! Uniform 1-D grids with trapezoidal quadrature, and fields living on them.
//!
//! The grid carries the quadrature weights that define the discrete inner
//! product `<f, g>_W = sum_k w_k f(x_k) g(x_k)`; every inner product, norm and
//! projection in this crate goes through it.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A uniform discretization of `[0, L]` with trapezoidal quadrature weights.
///
/// End weights are `h/2`, interior weights `h`, so the weights sum to `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    length: f64,
}

impl Grid {
    /// Builds a uniform grid of `n` points spanning `[0, length]`.
    pub fn uniform(n: usize, length: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("grid needs at least 2 points, got {n}"),
            });
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "length",
                reason: format!("domain length must be positive, got {length}"),
            });
        }
        let h = length / (n - 1) as f64;
        let points = (0..n).map(|i| i as f64 * h).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            points,
            weights,
            length,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain_length(&self) -> f64 {
        self.length
    }

    /// Grid spacing `h = L / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        self.length / (self.points.len() - 1) as f64
    }

    /// Weighted inner product of two value vectors on this grid.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        self.weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, a), b)| w * a * b)
            .sum()
    }

    /// Weighted L2 norm induced by [`Grid::inner_product`].
    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner_product(f, f).sqrt()
    }

    /// Index of the grid point closest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let h = self.spacing();
        let i = (x / h).round() as isize;
        i.clamp(0, self.len() as isize - 1) as usize
    }
}

/// A function sample: one real value per grid point.
///
/// Fields share their grid through an `Arc`, so cloning a field (the MCMC
/// inner loop does this a lot) never copies the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    grid: Arc<Grid>,
}

impl Field {
    pub fn new(values: Vec<f64>, grid: Arc<Grid>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Contract(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("field contains non-finite values".into()));
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `‖u‖_X`: the weighted L2 norm of the field.
    pub fn norm(&self) -> f64 {
        self.grid.norm(&self.values)
    }

    /// Evaluates the field at `x` by linear interpolation between grid points.
    pub fn interpolate(&self, x: f64) -> f64 {
        let pts = self.grid.points();
        let n = pts.len();
        if x <= pts[0] {
            return self.values[0];
        }
        if x >= pts[n - 1] {
            return self.values[n - 1];
        }
        let h = self.grid.spacing();
        let i = ((x / h).floor() as usize).min(n - 2);
        let t = (x - pts[i]) / h;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}
