//! Dimension-robust MCMC for Bayesian inverse problems on function spaces.
//!
//! The crate provides two samplers over Gaussian-prior function spaces:
//!
//! - the preconditioned Crank-Nicolson (pCN) sampler, whose proposal
//!   `v = (1 - beta^2)^{1/2} u + beta w` is reversible with respect to the
//!   prior, so its acceptance probability depends only on the data misfit and
//!   stays bounded away from zero under mesh refinement;
//! - a hybrid adaptive sampler that runs an adaptive Metropolis random walk in
//!   the leading Karhunen-Loève subspace, learning the posterior covariance of
//!   those coefficients on the fly, while falling back to pCN in the
//!   complement.
//!
//! Around the samplers sit the pieces needed to run complete experiments:
//! Matérn priors and their KL decomposition ([`prior`]), benchmark forward
//! models with synthetic-data generation ([`models`]), chain diagnostics
//! ([`diagnostics`]), and a CLI harness with reproducible presets
//! ([`harness`]).

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod models;
pub mod prior;
pub mod samplers;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use prior::{build_matern_covariance, kl_decompose, select_j, KlBasis, MaternParams};
