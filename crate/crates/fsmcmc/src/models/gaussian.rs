//! Quadratic coefficient potential with a closed-form Gaussian posterior.
//!
//! `Phi(u) = x^T Gamma x / 2` with `x` the first `K` KL coefficients and
//! `Gamma[i,j] = exp(-(i-j)^2 / Delta)`. Because the prior is the diagonal
//! Gaussian `N(0, diag(alpha))` in those coefficients, the posterior is again
//! Gaussian with covariance `(D^{-1} + Gamma)^{-1}`: a matrix-inversion oracle
//! for every sampler test.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::prior::KlBasis;
use crate::samplers::Potential;

/// `K x K` coupling matrix `Gamma[i,j] = exp(-(i-j)^2 / Delta)`.
pub fn build_gamma(k: usize, delta: f64) -> Result<DMatrix<f64>> {
    if k < 1 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "need at least one coefficient".into(),
        });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must be positive, got {delta}"),
        });
    }
    Ok(DMatrix::from_fn(k, k, |i, j| {
        let d = i as f64 - j as f64;
        (-d * d / delta).exp()
    }))
}

/// Specification of the quadratic coefficient potential.
#[derive(Debug, Clone)]
pub struct GaussianPotentialSpec {
    k: usize,
    delta: f64,
    gamma: DMatrix<f64>,
}

impl GaussianPotentialSpec {
    pub fn new(k: usize, delta: f64) -> Result<Self> {
        let gamma = build_gamma(k, delta)?;
        Ok(Self { k, delta, gamma })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }
}

/// Evaluates `x^T Gamma x / 2` on the first `K` KL coefficients of `u`.
pub fn phi_gaussian(u: &Field, spec: &GaussianPotentialSpec, basis: &KlBasis) -> f64 {
    let x = basis
        .project(u, spec.k)
        .expect("spec K must not exceed the basis size");
    quadratic_form(&spec.gamma, &x)
}

fn quadratic_form(gamma: &DMatrix<f64>, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            total += x[i] * gamma[(i, j)] * x[j];
        }
    }
    0.5 * total
}

/// Exact posterior covariance `(D^{-1} + Gamma)^{-1}` of the first `K`
/// coefficients, with `D = diag(alpha_1..alpha_K)`.
///
/// This closed form is the oracle the sampler tests compare against.
pub fn exact_posterior_covariance(
    basis: &KlBasis,
    spec: &GaussianPotentialSpec,
) -> Result<DMatrix<f64>> {
    let k = spec.k;
    if k > basis.len() {
        return Err(Error::Configuration(format!(
            "K = {k} exceeds the {}-mode basis",
            basis.len()
        )));
    }
    let alphas = &basis.eigenvalues()[..k];
    if alphas.iter().any(|a| *a <= 0.0) {
        return Err(Error::Configuration(
            "posterior covariance needs strictly positive leading eigenvalues".into(),
        ));
    }
    let mut precision = spec.gamma.clone();
    for (i, a) in alphas.iter().enumerate() {
        precision[(i, i)] += 1.0 / a;
    }
    precision
        .try_inverse()
        .ok_or_else(|| Error::Configuration("posterior precision is singular".into()))
}

/// The quadratic potential bound to a basis, usable as a chain target.
pub struct GaussianPotential {
    pub spec: GaussianPotentialSpec,
    pub basis: Arc<KlBasis>,
}

impl Potential for GaussianPotential {
    fn phi(&self, u: &Field) -> f64 {
        phi_gaussian(u, &self.spec, &self.basis)
    }
}
