//! Hybrid adaptive sampler: adaptive Metropolis on the leading KL
//! coefficients, pCN on the complement.
//!
//! Coordinates move as
//!
//! ```text
//! <v, e_i> = <u, e_i> + beta w_i                      i <= J,  w ~ N(0, Sigma)
//! <v, e_i> = (1 - beta^2)^{1/2} <u, e_i> + beta w_i   i  > J,  w_i ~ N(0, alpha_i)
//! ```
//!
//! The random-walk block breaks prior reversibility, so the acceptance ratio
//! picks up the correction `1/2 sum_{i<=J} (<u,e_i>^2 - <v,e_i>^2) / alpha_i`
//! on top of the potential difference. `Sigma` is the gated running
//! covariance of the projected chain history, regularized by `delta I`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::prior::KlBasis;
use crate::samplers::{metropolis_accept, AdaptState, Chain, Potential, SigmaSnapshot};

pub use crate::samplers::adapt::CovarianceStructure;

/// Configuration of a hybrid run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    /// Step size in `[0, 1]`, shared by both blocks.
    pub beta: f64,
    /// Dimension of the adapted subspace.
    pub j_dim: usize,
    /// Length of the pCN warm start that seeds the covariance.
    pub n_prerun: usize,
    /// Length of the adaptive measured phase.
    pub n_samples: usize,
    /// Covariance regularizer `delta`.
    pub delta_reg: f64,
    /// Norm threshold `R`: states at or above it never enter the statistics.
    pub r_threshold: f64,
    /// Seed recorded for provenance; runners derive their RNG from it.
    pub seed: u64,
    /// Take a covariance snapshot every this many iterations.
    pub snapshot_stride: usize,
    /// Full covariance, or the diagonal baseline.
    pub structure: CovarianceStructure,
}

impl HybridConfig {
    pub fn validate(&self, basis: &KlBasis) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must lie in [0, 1], got {}", self.beta),
            });
        }
        let n = basis.len();
        if self.j_dim < 1 || self.j_dim > n {
            return Err(Error::InvalidParameter {
                name: "j_dim",
                reason: format!("must lie in 1..={n}, got {}", self.j_dim),
            });
        }
        if basis.eigenvalues()[self.j_dim - 1] <= 0.0 {
            return Err(Error::Configuration(format!(
                "alpha_{} is zero: J = {} exceeds the strictly positive part \
                 of the discrete spectrum",
                self.j_dim, self.j_dim
            )));
        }
        if self.n_prerun < 2 {
            return Err(Error::InvalidParameter {
                name: "n_prerun",
                reason: "covariance seeding needs at least 2 pre-run samples".into(),
            });
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "chain needs at least one sample".into(),
            });
        }
        if !(self.delta_reg > 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta_reg",
                reason: format!("must be positive, got {}", self.delta_reg),
            });
        }
        if !(self.r_threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_threshold",
                reason: format!("must be positive, got {}", self.r_threshold),
            });
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "snapshot_stride",
                reason: "stride must be positive".into(),
            });
        }
        Ok(())
    }

    /// The default norm threshold: ten prior standard deviations in the
    /// field norm, `10 sqrt(sum_j alpha_j)`. Far beyond any plausible state
    /// on a well-posed problem, yet finite as the convergence argument needs.
    pub fn default_r_threshold(basis: &KlBasis) -> f64 {
        10.0 * basis.trace().sqrt()
    }
}

/// One hybrid proposal from `u` with subspace covariance `sigma_hat`.
///
/// Fails if `sigma_hat` has no Cholesky factor (not positive definite).
pub fn hybrid_propose<R: Rng + ?Sized>(
    u: &Field,
    beta: f64,
    sigma_hat: &DMatrix<f64>,
    basis: &KlBasis,
    j_dim: usize,
    rng: &mut R,
) -> Result<Field> {
    let x_u = basis.project(u, j_dim)?;
    let chol = factor_sigma(sigma_hat)?;
    let (v, _x_v) = propose_from_parts(u, &x_u, beta, &chol, basis, j_dim, rng);
    Ok(v)
}

fn factor_sigma(sigma_hat: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(sigma_hat.clone()).ok_or_else(|| {
        Error::AdaptationState("subspace covariance is not positive definite".into())
    })
}

/// Core proposal step reusing the already-projected coefficients of `u`.
/// Returns the proposal and its leading coefficients.
fn propose_from_parts<R: Rng + ?Sized>(
    u: &Field,
    x_u: &[f64],
    beta: f64,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    basis: &KlBasis,
    j_dim: usize,
    rng: &mut R,
) -> (Field, Vec<f64>) {
    let j = j_dim;
    // Random-walk move in the adapted subspace.
    let z = DVector::from_fn(j, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w_head = chol.l() * z;
    let x_v: Vec<f64> = (0..j).map(|i| x_u[i] + beta * w_head[i]).collect();

    // pCN move in the complement: damp u's tail part and add a tail draw.
    let u_head = basis.reconstruct(x_u).expect("head dimension in range");
    let damp = (1.0 - beta * beta).max(0.0).sqrt();
    let w_tail = basis.sample_prior_tail(j, rng);
    let v_head = basis.reconstruct(&x_v).expect("head dimension in range");

    let values: Vec<f64> = u
        .values()
        .iter()
        .zip(u_head.values())
        .zip(w_tail.values())
        .zip(v_head.values())
        .map(|(((uu, uh), wt), vh)| vh + damp * (uu - uh) + beta * wt)
        .collect();
    let v = Field::new(values, u.grid().clone()).expect("proposal is finite");
    (v, x_v)
}

/// Log acceptance ratio of the hybrid proposal:
/// `Phi(u) - Phi(v) + 1/2 sum_{i<=J} (<u,e_i>^2 - <v,e_i>^2) / alpha_i`.
///
/// `None` marks an automatic rejection (non-finite proposal potential).
pub fn hybrid_log_acceptance(
    u: &Field,
    v: &Field,
    phi_u: f64,
    phi_v: f64,
    basis: &KlBasis,
    j_dim: usize,
) -> Result<Option<f64>> {
    let alphas = &basis.eigenvalues()[..j_dim];
    if alphas.iter().any(|a| *a <= 0.0) {
        return Err(Error::Configuration(
            "acceptance correction requires strictly positive leading eigenvalues".into(),
        ));
    }
    let x_u = basis.project(u, j_dim)?;
    let x_v = basis.project(v, j_dim)?;
    Ok(log_acceptance_from_coeffs(&x_u, &x_v, phi_u, phi_v, alphas))
}

fn log_acceptance_from_coeffs(
    x_u: &[f64],
    x_v: &[f64],
    phi_u: f64,
    phi_v: f64,
    alphas: &[f64],
) -> Option<f64> {
    if !phi_v.is_finite() {
        return None;
    }
    let correction: f64 = x_u
        .iter()
        .zip(x_v)
        .zip(alphas)
        .map(|((xu, xv), a)| 0.5 * (xu * xu - xv * xv) / a)
        .sum();
    if !phi_u.is_finite() {
        return Some(f64::INFINITY);
    }
    Some(phi_u - phi_v + correction)
}

/// Runs the hybrid adaptive chain.
///
/// Phases: a pCN pre-run of `n_prerun` states (the initial state counts as
/// the first) seeds the gated covariance estimator; the measured phase then
/// alternates hybrid proposals, the corrected accept step, and a covariance
/// update with each new state under the norm gate. Snapshots of the adapted
/// covariance are taken every `snapshot_stride` iterations.
pub fn run_hybrid_chain<P: Potential, R: Rng + ?Sized>(
    config: &HybridConfig,
    potential: &P,
    basis: &KlBasis,
    initial: Field,
    rng: &mut R,
) -> Result<Chain> {
    config.validate(basis)?;
    let j = config.j_dim;
    let alphas: Vec<f64> = basis.eigenvalues()[..j].to_vec();

    let mut adapt = AdaptState::new(j, config.delta_reg, config.r_threshold, config.structure)?;
    let mut u = initial;
    let mut phi_u = potential.phi(&u);
    if !phi_u.is_finite() {
        log::warn!("initial state has non-finite potential; first finite proposal will be taken");
    }

    // pCN pre-run; every visited state streams through the same gated
    // recursion used later, so a single covariance code path exists.
    adapt.update(&basis.project(&u, j)?, u.norm());
    let mut prerun_accepts = 0;
    let mut auto_rejects = 0;
    for _ in 1..config.n_prerun {
        let v = crate::samplers::pcn::pcn_propose(&u, config.beta, basis, rng);
        let phi_v = potential.phi(&v);
        if !phi_v.is_finite() {
            auto_rejects += 1;
        }
        if metropolis_accept(crate::samplers::pcn::pcn_log_acceptance(phi_u, phi_v), rng) {
            u = v;
            phi_u = phi_v;
            prerun_accepts += 1;
        }
        adapt.update(&basis.project(&u, j)?, u.norm());
    }
    if adapt.absorbed() < 2 {
        return Err(Error::Startup(format!(
            "only {} of {} pre-run states passed the norm gate (R = {}); \
             increase R or improve the initial state",
            adapt.absorbed(),
            config.n_prerun,
            config.r_threshold
        )));
    }

    let n = config.n_samples;
    let mut states = Vec::with_capacity(n);
    let mut phis = Vec::with_capacity(n);
    let mut accepts = 0;
    let mut snapshots = Vec::new();
    let mut x_u = basis.project(&u, j)?;

    let snap = |iter: usize, adapt: &AdaptState, out: &mut Vec<SigmaSnapshot>| {
        if let Some(sigma) = adapt.sigma_hat() {
            out.push(SigmaSnapshot {
                iteration: iter,
                absorbed: adapt.absorbed(),
                sigma,
            });
        }
    };
    snap(0, &adapt, &mut snapshots);

    for i in 0..n {
        let sigma = adapt
            .sigma_hat()
            .expect("covariance defined: seeding absorbed >= 2 samples");
        let chol = factor_sigma(&sigma)?;
        let (v, x_v) = propose_from_parts(&u, &x_u, config.beta, &chol, basis, j, rng);
        let phi_v = potential.phi(&v);
        if !phi_v.is_finite() {
            log::warn!("proposal potential is non-finite; auto-rejecting");
            auto_rejects += 1;
        }
        let log_ratio = log_acceptance_from_coeffs(&x_u, &x_v, phi_u, phi_v, &alphas);
        if metropolis_accept(log_ratio, rng) {
            u = v;
            phi_u = phi_v;
            x_u = x_v;
            accepts += 1;
        }
        // Algorithm step: the new state (accepted or retained) feeds the
        // covariance, gated on its norm.
        adapt.update(&x_u, u.norm());
        states.push(u.clone());
        phis.push(phi_u);
        if (i + 1) % config.snapshot_stride == 0 {
            snap(i + 1, &adapt, &mut snapshots);
        }
    }

    Ok(Chain {
        states,
        log_potentials: phis,
        accept_count: accepts,
        proposal_count: n,
        prerun_accept_count: prerun_accepts,
        prerun_proposal_count: config.n_prerun - 1,
        auto_reject_count: auto_rejects,
        sigma_snapshots: snapshots,
    })
}
