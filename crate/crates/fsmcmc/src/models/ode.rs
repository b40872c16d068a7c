//! Exponential-decay ODE forward model: `x'(t) = -u(t) x(t)`, `x(0) = x0`.
//!
//! The equation is separable, so the solver evaluates
//! `x(t) = x0 exp(-int_0^t u)` with the integral accumulated by the
//! trapezoid rule on the field grid. This is unconditionally stable and
//! second-order accurate for smooth coefficients.

use crate::grid::Field;
use crate::models::ForwardModel;

/// Solves the decay ODE and returns `x` at the requested observation times.
///
/// Observation values are linearly interpolated from the grid nodes.
pub fn solve_ode(u: &Field, x0: f64, obs_times: &[f64]) -> Vec<f64> {
    let grid = u.grid();
    let pts = grid.points();
    let vals = u.values();
    let n = pts.len();

    // Cumulative trapezoid of u along the grid.
    let mut integral = Vec::with_capacity(n);
    integral.push(0.0);
    for i in 1..n {
        let prev = integral[i - 1];
        integral.push(prev + 0.5 * (vals[i - 1] + vals[i]) * (pts[i] - pts[i - 1]));
    }
    let x_nodes: Vec<f64> = integral.iter().map(|s| x0 * (-s).exp()).collect();

    let h = grid.spacing();
    obs_times
        .iter()
        .map(|&t| {
            if t <= pts[0] {
                return x_nodes[0];
            }
            if t >= pts[n - 1] {
                return x_nodes[n - 1];
            }
            let i = ((t / h).floor() as usize).min(n - 2);
            let s = (t - pts[i]) / h;
            x_nodes[i] * (1.0 - s) + x_nodes[i + 1] * s
        })
        .collect()
}

/// The decay ODE as a forward model observed at fixed instants.
pub struct OdeModel {
    pub x0: f64,
    times: Vec<f64>,
}

impl OdeModel {
    pub fn new(x0: f64, times: Vec<f64>) -> Self {
        Self { x0, times }
    }

    /// `n_obs` equally spaced observations `k * T / n_obs`, `k = 1..=n_obs`.
    ///
    /// The instant `t = 0` is omitted: `x(0) = x0` is known exactly and
    /// carries no information about the coefficient.
    pub fn with_uniform_observations(x0: f64, t_final: f64, n_obs: usize) -> Self {
        let times = (1..=n_obs)
            .map(|k| k as f64 * t_final / n_obs as f64)
            .collect();
        Self { x0, times }
    }
}

impl ForwardModel for OdeModel {
    fn times(&self) -> &[f64] {
        &self.times
    }

    fn predict(&self, u: &Field) -> Vec<f64> {
        solve_ode(u, self.x0, &self.times)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::sync::Arc;

    fn grid201() -> Arc<Grid> {
        Arc::new(Grid::uniform(201, 1.0).unwrap())
    }

    #[test]
    fn zero_coefficient_keeps_the_initial_value() {
        let g = grid201();
        let u = Field::zeros(g);
        let xs = solve_ode(&u, 3.5, &[0.0, 0.3, 1.0]);
        for x in xs {
            assert_eq!(x, 3.5);
        }
    }

    #[test]
    fn constant_coefficient_matches_exponential() {
        let g = grid201();
        let u = Field::new(vec![1.0; 201], g).unwrap();
        let xs = solve_ode(&u, 1.0, &[1.0]);
        // Trapezoid integrates a constant exactly.
        assert!((xs[0] - (-1.0f64).exp()).abs() < 1e-6);
        assert!((xs[0] - 0.36787944117144233).abs() < 1e-9);
    }

    #[test]
    fn linear_coefficient_matches_analytic_integral() {
        // u(t) = t integrates to t^2/2; x(1) = exp(-1/2). The trapezoid rule
        // is exact for linear integrands, so only round-off remains.
        let g = grid201();
        let u = Field::new(g.points().to_vec(), g.clone()).unwrap();
        let xs = solve_ode(&u, 1.0, &[1.0]);
        assert!((xs[0] - 0.6065306597126334).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_error_decays_quadratically() {
        // u(t) = sin(2 pi t): int_0^1 u = (1 - cos(2 pi)) / (2 pi) = 0, and
        // partial integrals are smooth, so the node error is O(h^2).
        let exact_at = |t: f64| ((2.0 * std::f64::consts::PI * t).cos() - 1.0)
            / (2.0 * std::f64::consts::PI);
        let err_for = |n: usize| {
            let g = Arc::new(Grid::uniform(n, 1.0).unwrap());
            let u = Field::new(
                g.points()
                    .iter()
                    .map(|t| (2.0 * std::f64::consts::PI * t).sin())
                    .collect(),
                g.clone(),
            )
            .unwrap();
            let obs: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
            let xs = solve_ode(&u, 1.0, &obs);
            obs.iter()
                .zip(&xs)
                .map(|(t, x)| (x - (exact_at(*t)).exp()).abs())
                .fold(0.0f64, f64::max)
        };
        let e1 = err_for(51);
        let e2 = err_for(101);
        let order = (e1 / e2).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "observed order {order}, errors {e1} {e2}"
        );
    }

    #[test]
    fn observations_interpolate_between_nodes() {
        let g = Arc::new(Grid::uniform(2, 1.0).unwrap());
        let u = Field::zeros(g);
        let xs = solve_ode(&u, 2.0, &[0.5]);
        assert_eq!(xs[0], 2.0);
    }

    #[test]
    fn uniform_observation_times_exclude_zero_and_hit_t_final() {
        let m = OdeModel::with_uniform_observations(1.0, 1.0, 50);
        assert_eq!(m.times().len(), 50);
        assert!((m.times()[0] - 0.02).abs() < 1e-15);
        assert!((m.times()[49] - 1.0).abs() < 1e-15);
    }
}
