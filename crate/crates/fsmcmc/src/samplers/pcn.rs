//! The preconditioned Crank-Nicolson sampler.
//!
//! Proposal: `v = (1 - beta^2)^{1/2} u + beta w` with `w` a prior draw. The
//! proposal is reversible with respect to the prior, so the acceptance ratio
//! reduces to `exp(Phi(u) - Phi(v))` and survives mesh refinement unchanged.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::prior::KlBasis;
use crate::samplers::{metropolis_accept, Chain, Potential};

/// Step size of a pCN run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcnConfig {
    /// Step size in `[0, 1]`.
    pub beta: f64,
    pub n_samples: usize,
    /// Seed recorded for provenance; runners derive their RNG from it.
    pub seed: u64,
}

impl PcnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must lie in [0, 1], got {}", self.beta),
            });
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "chain needs at least one sample".into(),
            });
        }
        Ok(())
    }
}

/// Maps the Crank-Nicolson step `delta` in `(0, 2)` to the pCN step size
/// `beta = sqrt(8 delta) / (2 + delta)`, always in `(0, 1]`.
pub fn beta_from_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must lie in (0, 2), got {delta}"),
        });
    }
    Ok((8.0 * delta).sqrt() / (2.0 + delta))
}

/// One pCN proposal from `u`.
pub fn pcn_propose<R: Rng + ?Sized>(
    u: &Field,
    beta: f64,
    basis: &KlBasis,
    rng: &mut R,
) -> Field {
    let w = basis.sample_prior(rng);
    let damp = (1.0 - beta * beta).max(0.0).sqrt();
    let values = u
        .values()
        .iter()
        .zip(w.values())
        .map(|(uu, ww)| damp * uu + beta * ww)
        .collect();
    Field::new(values, u.grid().clone()).expect("proposal is finite")
}

/// Log acceptance ratio `Phi(u) - Phi(v)`.
///
/// `None` signals an automatic rejection: the proposal's potential is
/// non-finite (a solver blow-up). A non-finite current potential with a
/// finite proposal accepts unconditionally so the chain can escape a bad
/// initial state.
pub fn pcn_log_acceptance(phi_u: f64, phi_v: f64) -> Option<f64> {
    if !phi_v.is_finite() {
        return None;
    }
    if !phi_u.is_finite() {
        return Some(f64::INFINITY);
    }
    Some(phi_u - phi_v)
}

/// Runs a pCN chain, recording the state after each of `n_samples` proposals.
pub fn run_pcn_chain<P: Potential, R: Rng + ?Sized>(
    config: &PcnConfig,
    potential: &P,
    basis: &KlBasis,
    initial: Field,
    rng: &mut R,
) -> Result<Chain> {
    config.validate()?;
    let mut u = initial;
    let mut phi_u = potential.phi(&u);
    if !phi_u.is_finite() {
        log::warn!("initial state has non-finite potential; first finite proposal will be taken");
    }

    let n = config.n_samples;
    let mut states = Vec::with_capacity(n);
    let mut phis = Vec::with_capacity(n);
    let mut accepts = 0;
    let mut auto_rejects = 0;

    for _ in 0..n {
        let v = pcn_propose(&u, config.beta, basis, rng);
        let phi_v = potential.phi(&v);
        if !phi_v.is_finite() {
            log::warn!("proposal potential is non-finite; auto-rejecting");
            auto_rejects += 1;
        }
        if metropolis_accept(pcn_log_acceptance(phi_u, phi_v), rng) {
            u = v;
            phi_u = phi_v;
            accepts += 1;
        }
        states.push(u.clone());
        phis.push(phi_u);
    }

    Ok(Chain {
        states,
        log_potentials: phis,
        accept_count: accepts,
        proposal_count: n,
        prerun_accept_count: 0,
        prerun_proposal_count: 0,
        auto_reject_count: auto_rejects,
        sigma_snapshots: Vec::new(),
    })
}

/// Knobs of the step-size search.
#[derive(Debug, Clone, Copy)]
pub struct TuneOptions {
    pub initial_beta: f64,
    pub batch_size: usize,
    pub n_batches: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            initial_beta: 0.5,
            batch_size: 200,
            n_batches: 25,
        }
    }
}

/// Finds a pCN step size whose acceptance rate is near `target_rate`.
///
/// A throwaway tuning chain runs in batches; after each batch the step size
/// is multiplied by `exp(rate - target)` and clamped to `[1e-4, 1]`. The
/// returned value is frozen for the measured run, so the measurement itself
/// stays non-adaptive. Non-convergence simply returns the last iterate.
pub fn tune_beta<P: Potential, R: Rng + ?Sized>(
    target_rate: f64,
    potential: &P,
    basis: &KlBasis,
    initial: &Field,
    rng: &mut R,
) -> Result<f64> {
    tune_beta_with(TuneOptions::default(), target_rate, potential, basis, initial, rng)
}

pub fn tune_beta_with<P: Potential, R: Rng + ?Sized>(
    opts: TuneOptions,
    target_rate: f64,
    potential: &P,
    basis: &KlBasis,
    initial: &Field,
    rng: &mut R,
) -> Result<f64> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::InvalidParameter {
            name: "target_rate",
            reason: format!("must lie in (0, 1), got {target_rate}"),
        });
    }
    let mut beta = opts.initial_beta.clamp(1e-4, 1.0);
    let mut u = initial.clone();
    let mut phi_u = potential.phi(&u);
    for _ in 0..opts.n_batches {
        let mut accepts = 0usize;
        for _ in 0..opts.batch_size {
            let v = pcn_propose(&u, beta, basis, rng);
            let phi_v = potential.phi(&v);
            if metropolis_accept(pcn_log_acceptance(phi_u, phi_v), rng) {
                u = v;
                phi_u = phi_v;
                accepts += 1;
            }
        }
        let rate = accepts as f64 / opts.batch_size as f64;
        beta = (beta * (rate - target_rate).exp()).clamp(1e-4, 1.0);
    }
    Ok(beta)
}
