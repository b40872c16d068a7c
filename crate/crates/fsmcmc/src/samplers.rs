//! MCMC samplers over function-space priors.
//!
//! [`pcn`] holds the preconditioned Crank-Nicolson sampler and step-size
//! tuning; [`hybrid`] the adaptive sampler that learns a covariance for the
//! leading KL coefficients (full or diagonal) and keeps pCN on the rest;
//! [`adapt`] the gated running-covariance estimator they share.

use nalgebra::DMatrix;

use crate::grid::Field;

pub mod adapt;
pub mod hybrid;
pub mod pcn;

pub use adapt::AdaptState;
pub use hybrid::{
    hybrid_log_acceptance, hybrid_propose, run_hybrid_chain, CovarianceStructure, HybridConfig,
};
pub use pcn::{
    beta_from_delta, pcn_log_acceptance, pcn_propose, run_pcn_chain, tune_beta, tune_beta_with,
    PcnConfig, TuneOptions,
};

/// Negative log-likelihood evaluated on fields.
///
/// Implementations must be safe to call from multiple chains at once.
pub trait Potential: Sync {
    fn phi(&self, u: &Field) -> f64;
}

impl<F: Fn(&Field) -> f64 + Sync> Potential for F {
    fn phi(&self, u: &Field) -> f64 {
        self(u)
    }
}

/// The flat potential: every proposal is accepted, the chain samples the prior.
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn phi(&self, _u: &Field) -> f64 {
        0.0
    }
}

/// Periodic copy of the adapted covariance, for the diminishing-adaptation
/// monitor.
#[derive(Debug, Clone)]
pub struct SigmaSnapshot {
    /// Main-phase iteration at which the copy was taken (0 = after seeding).
    pub iteration: usize,
    /// Number of samples absorbed into the estimate at that point.
    pub absorbed: usize,
    pub sigma: DMatrix<f64>,
}

/// Output of a chain run: stored states plus acceptance and adaptation
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct Chain {
    pub states: Vec<Field>,
    pub log_potentials: Vec<f64>,
    pub accept_count: usize,
    pub proposal_count: usize,
    /// Pre-run bookkeeping (zero for plain pCN runs).
    pub prerun_accept_count: usize,
    pub prerun_proposal_count: usize,
    /// Proposals rejected because the potential came back non-finite.
    pub auto_reject_count: usize,
    pub sigma_snapshots: Vec<SigmaSnapshot>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposal_count == 0 {
            return 0.0;
        }
        self.accept_count as f64 / self.proposal_count as f64
    }

    pub fn prerun_acceptance_rate(&self) -> f64 {
        if self.prerun_proposal_count == 0 {
            return 0.0;
        }
        self.prerun_accept_count as f64 / self.prerun_proposal_count as f64
    }

    /// Values of one grid point across the stored states.
    pub fn series_at(&self, grid_index: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|u| u.values()[grid_index])
            .collect()
    }

    /// Writes the chain as CSV (`iteration,phi,u_0,...`), keeping every
    /// `thin`-th state.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W, thin: usize) -> std::io::Result<()> {
        let thin = thin.max(1);
        let n = self.states.first().map_or(0, |u| u.values().len());
        write!(out, "iteration,phi")?;
        for k in 0..n {
            write!(out, ",u_{k}")?;
        }
        writeln!(out)?;
        for (i, (u, phi)) in self.states.iter().zip(&self.log_potentials).enumerate() {
            if i % thin != 0 {
                continue;
            }
            write!(out, "{i},{:.16e}", phi)?;
            for v in u.values() {
                write!(out, ",{:.16e}", v)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Shared Metropolis accept step. A uniform is always drawn, so accept and
/// reject paths consume the RNG identically; `None` marks an automatic
/// rejection (non-finite potential).
pub(crate) fn metropolis_accept<R: rand::Rng + ?Sized>(
    log_ratio: Option<f64>,
    rng: &mut R,
) -> bool {
    let theta: f64 = rng.random();
    match log_ratio {
        None => false,
        Some(lr) if lr >= 0.0 => true,
        Some(lr) => theta <= lr.exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn metropolis_always_accepts_nonnegative_log_ratio() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(metropolis_accept(Some(0.0), &mut rng));
            assert!(metropolis_accept(Some(2.5), &mut rng));
        }
    }

    #[test]
    fn metropolis_never_accepts_auto_reject() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(!metropolis_accept(None, &mut rng));
        }
    }

    #[test]
    fn metropolis_accepts_at_the_expected_frequency() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let log_ratio = -0.5f64;
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| metropolis_accept(Some(log_ratio), &mut rng))
            .count();
        let rate = hits as f64 / trials as f64;
        let expect = log_ratio.exp();
        assert!((rate - expect).abs() < 0.005, "rate {rate} vs {expect}");
    }
}
