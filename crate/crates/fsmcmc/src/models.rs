//! Benchmark forward models and their misfit potentials.
//!
//! Three potentials drive the experiments: a quadratic potential acting on KL
//! coefficients (with a closed-form Gaussian posterior used as a test oracle),
//! an ODE decay-coefficient inverse problem, and a heat-equation Robin-coefficient
//! inverse problem. Synthetic data generation lives here too.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Field;

pub mod gaussian;
pub mod heat;
pub mod ode;

pub use gaussian::{build_gamma, exact_posterior_covariance, phi_gaussian, GaussianPotentialSpec};
pub use heat::{solve_heat_robin, HeatModelSpec};
pub use ode::solve_ode;

/// Observed data: instants, values and the common noise standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    times: Vec<f64>,
    values: Vec<f64>,
    noise_sd: f64,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<f64>, noise_sd: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Contract(format!(
                "{} observation times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Contract("observation set is empty".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Contract(
                "observation times must be strictly increasing".into(),
            ));
        }
        if times[0] < 0.0 {
            return Err(Error::Contract("observation times must be >= 0".into()));
        }
        if !(noise_sd > 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_sd",
                reason: format!("must be positive, got {noise_sd}"),
            });
        }
        Ok(Self {
            times,
            values,
            noise_sd,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Whether the misfit carries the Gaussian log-likelihood factor 1/2.
///
/// `Halved` is the default; `Unhalved` reproduces the plain squared-norm form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MisfitConvention {
    #[default]
    Halved,
    Unhalved,
}

/// Noise-weighted squared misfit between predictions and data.
///
/// Returns a non-finite value when predictions are non-finite, which chain
/// runners treat as an automatic rejection.
pub fn phi_misfit(predicted: &[f64], data: &ObservationSet) -> f64 {
    phi_misfit_with(predicted, data, MisfitConvention::Halved)
}

pub fn phi_misfit_with(
    predicted: &[f64],
    data: &ObservationSet,
    convention: MisfitConvention,
) -> f64 {
    assert_eq!(
        predicted.len(),
        data.len(),
        "prediction/observation length mismatch"
    );
    let inv_var = 1.0 / (data.noise_sd * data.noise_sd);
    let ss: f64 = predicted
        .iter()
        .zip(&data.values)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    match convention {
        MisfitConvention::Halved => 0.5 * ss * inv_var,
        MisfitConvention::Unhalved => ss * inv_var,
    }
}

/// A forward map from a field to predicted observation values.
pub trait ForwardModel: Sync {
    /// Observation instants, strictly increasing.
    fn times(&self) -> &[f64];
    /// Predicted values at [`ForwardModel::times`] for the given field.
    fn predict(&self, u: &Field) -> Vec<f64>;
}

/// Runs the forward model on a truth field and adds i.i.d. Gaussian noise.
pub fn simulate_data<M: ForwardModel, R: Rng + ?Sized>(
    truth: &Field,
    model: &M,
    noise_sd: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    let clean = model.predict(truth);
    let noisy = clean
        .iter()
        .map(|c| c + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ObservationSet::new(model.times().to_vec(), noisy, noise_sd)
}

/// Misfit potential `Phi(u) = phi_misfit(model(u), data)`.
pub struct MisfitPotential<M> {
    pub model: M,
    pub data: ObservationSet,
    pub convention: MisfitConvention,
}

impl<M: ForwardModel> MisfitPotential<M> {
    pub fn new(model: M, data: ObservationSet) -> Self {
        Self {
            model,
            data,
            convention: MisfitConvention::Halved,
        }
    }

    pub fn phi(&self, u: &Field) -> f64 {
        phi_misfit_with(&self.model.predict(u), &self.data, self.convention)
    }
}

impl<M: ForwardModel> crate::samplers::Potential for MisfitPotential<M> {
    fn phi(&self, u: &Field) -> f64 {
        MisfitPotential::phi(self, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::Arc;

    struct IdentityAtNodes {
        times: Vec<f64>,
    }

    impl ForwardModel for IdentityAtNodes {
        fn times(&self) -> &[f64] {
            &self.times
        }
        fn predict(&self, u: &Field) -> Vec<f64> {
            self.times.iter().map(|t| u.interpolate(*t)).collect()
        }
    }

    #[test]
    fn observation_set_validates_inputs() {
        assert!(ObservationSet::new(vec![0.1, 0.2], vec![1.0], 0.1).is_err());
        assert!(ObservationSet::new(vec![0.2, 0.1], vec![1.0, 2.0], 0.1).is_err());
        assert!(ObservationSet::new(vec![0.1, 0.2], vec![1.0, 2.0], 0.0).is_err());
        assert!(ObservationSet::new(vec![], vec![], 0.1).is_err());
        assert!(ObservationSet::new(vec![0.1, 0.2], vec![1.0, 2.0], 0.1).is_ok());
    }

    #[test]
    fn misfit_is_zero_at_perfect_fit_and_positive_otherwise() {
        let data = ObservationSet::new(vec![0.5], vec![2.0], 0.1).unwrap();
        assert_eq!(phi_misfit(&[2.0], &data), 0.0);
        assert!(phi_misfit(&[2.1], &data) > 0.0);
    }

    #[test]
    fn misfit_single_residual_arithmetic() {
        // residual 0.1 with noise_sd 0.1: (0.1/0.1)^2 / 2 = 0.5
        let data = ObservationSet::new(vec![1.0], vec![1.0], 0.1).unwrap();
        assert!((phi_misfit(&[1.1], &data) - 0.5).abs() < 1e-12);
        let unhalved = phi_misfit_with(&[1.1], &data, MisfitConvention::Unhalved);
        assert!((unhalved - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_noise_sd_quarters_misfit() {
        let d1 = ObservationSet::new(vec![1.0, 2.0], vec![0.0, 0.0], 0.1).unwrap();
        let d2 = ObservationSet::new(vec![1.0, 2.0], vec![0.0, 0.0], 0.2).unwrap();
        let pred = [0.3, -0.4];
        assert!((phi_misfit(&pred, &d1) / phi_misfit(&pred, &d2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn misfit_propagates_nonfinite_predictions() {
        let data = ObservationSet::new(vec![1.0], vec![1.0], 0.1).unwrap();
        assert!(!phi_misfit(&[f64::NAN], &data).is_finite());
        assert!(!phi_misfit(&[f64::INFINITY], &data).is_finite());
    }

    #[test]
    fn simulate_data_recovers_solver_output_in_noiseless_limit() {
        let grid = Arc::new(Grid::uniform(11, 1.0).unwrap());
        let truth = Field::new(grid.points().to_vec(), grid.clone()).unwrap();
        let model = IdentityAtNodes {
            times: vec![0.2, 0.4, 0.6],
        };
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let data = simulate_data(&truth, &model, 1e-300, &mut rng).unwrap();
        for (v, t) in data.values().iter().zip(data.times()) {
            assert!((v - t).abs() < 1e-12);
        }
    }

    #[test]
    fn simulate_data_noise_has_requested_scale() {
        let grid = Arc::new(Grid::uniform(5, 1.0).unwrap());
        let truth = Field::zeros(grid.clone());
        let model = IdentityAtNodes {
            times: vec![0.25, 0.5, 0.75],
        };
        let noise_sd = 0.1;
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut sq = 0.0;
        let n_sets = 10_000;
        for _ in 0..n_sets {
            let data = simulate_data(&truth, &model, noise_sd, &mut rng).unwrap();
            for v in data.values() {
                sq += v * v;
            }
        }
        let sd = (sq / (3 * n_sets) as f64).sqrt();
        assert!((sd - noise_sd).abs() / noise_sd < 0.03, "sd = {sd}");
    }

    #[test]
    fn simulate_data_is_deterministic_under_fixed_seed() {
        let grid = Arc::new(Grid::uniform(5, 1.0).unwrap());
        let truth = Field::zeros(grid.clone());
        let model = IdentityAtNodes { times: vec![0.5] };
        let a = simulate_data(&truth, &model, 0.1, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        let b = simulate_data(&truth, &model, 0.1, &mut ChaCha20Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
