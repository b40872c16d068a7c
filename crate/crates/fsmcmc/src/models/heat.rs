//! Heat equation `u_t = u_xx` on `[0, L] x [0, T]` with Robin boundaries
//! `-u_x(0,t) + rho(t) u(0,t) = h0(t)` and `u_x(L,t) + rho(t) u(L,t) = h1(t)`.
//!
//! Discretization: Crank-Nicolson in time, second-order central differences in
//! space, with the boundary conditions eliminated through ghost points so the
//! whole scheme stays second order. Each step is one tridiagonal solve.

use std::sync::Arc;

use crate::grid::Field;
use crate::models::ForwardModel;

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Geometry, resolution and data functions of the Robin problem.
///
/// The sensor sits at `x = 0`; predictions are the sensor readings at the
/// observation times, linearly interpolated from the solver's time grid when
/// they fall between steps.
#[derive(Clone)]
pub struct HeatModelSpec {
    pub length: f64,
    pub t_final: f64,
    /// Number of spatial intervals (`nx + 1` nodes).
    pub nx: usize,
    /// Number of time steps.
    pub nt: usize,
    g: SpaceFn,
    h0: TimeFn,
    h1: TimeFn,
    obs_times: Vec<f64>,
}

impl std::fmt::Debug for HeatModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatModelSpec")
            .field("length", &self.length)
            .field("t_final", &self.t_final)
            .field("nx", &self.nx)
            .field("nt", &self.nt)
            .field("n_obs", &self.obs_times.len())
            .finish()
    }
}

impl HeatModelSpec {
    pub fn new(
        length: f64,
        t_final: f64,
        nx: usize,
        nt: usize,
        g: SpaceFn,
        h0: TimeFn,
        h1: TimeFn,
        obs_times: Vec<f64>,
    ) -> Self {
        assert!(nx >= 2 && nt >= 2, "solver needs nx, nt >= 2");
        assert!(length > 0.0 && t_final > 0.0);
        Self {
            length,
            t_final,
            nx,
            nt,
            g,
            h0,
            h1,
            obs_times,
        }
    }

    /// The benchmark data set: `L = T = 1`, `g(x) = x^2 + 1`,
    /// `h0(t) = t(2t+1)`, `h1(t) = 2 + t(2t+2)`, sensor read every `T/200`.
    pub fn benchmark(nx: usize, nt: usize) -> Self {
        let t_final = 1.0;
        let n_obs = 200;
        let obs_times = (1..=n_obs)
            .map(|k| k as f64 * t_final / n_obs as f64)
            .collect();
        Self::new(
            1.0,
            t_final,
            nx,
            nt,
            Arc::new(|x| x * x + 1.0),
            Arc::new(|t| t * (2.0 * t + 1.0)),
            Arc::new(|t| 2.0 + t * (2.0 * t + 2.0)),
            obs_times,
        )
    }

    pub fn with_observation_times(mut self, obs_times: Vec<f64>) -> Self {
        self.obs_times = obs_times;
        self
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }
}

/// Solves the Robin problem for coefficient `rho(t)` (a field over `[0, T]`)
/// and returns the sensor values `u(0, t)` at the spec's observation times.
///
/// A singular tridiagonal system (pathological `rho`) yields all-NaN output,
/// which downstream misfits convert into an automatic rejection.
pub fn solve_heat_robin(rho: &Field, spec: &HeatModelSpec) -> Vec<f64> {
    let sensor = sensor_series(rho, spec);
    let dt = spec.t_final / spec.nt as f64;
    spec.obs_times
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                return sensor[0];
            }
            if t >= spec.t_final {
                return sensor[spec.nt];
            }
            let k = ((t / dt).floor() as usize).min(spec.nt - 1);
            let s = (t - k as f64 * dt) / dt;
            sensor[k] * (1.0 - s) + sensor[k + 1] * s
        })
        .collect()
}

/// Full sensor history `u(0, t_k)` for `k = 0..=nt`.
pub fn sensor_series(rho: &Field, spec: &HeatModelSpec) -> Vec<f64> {
    let nx = spec.nx;
    let nt = spec.nt;
    let dx = spec.length / nx as f64;
    let dt = spec.t_final / nt as f64;
    let lam = 0.5 * dt / (dx * dx);

    // rho sampled on the solver's time nodes.
    let rho_t: Vec<f64> = (0..=nt)
        .map(|k| rho.interpolate(k as f64 * dt))
        .collect();

    let mut u: Vec<f64> = (0..=nx).map(|i| (spec.g)(i as f64 * dx)).collect();
    let mut sensor = Vec::with_capacity(nt + 1);
    sensor.push(u[0]);

    let mut diag = vec![0.0; nx + 1];
    let mut rhs = vec![0.0; nx + 1];
    let mut scratch = vec![0.0; nx + 1];

    for k in 0..nt {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let (r0, r1) = (rho_t[k], rho_t[k + 1]);

        // Interior rows.
        for i in 1..nx {
            diag[i] = 1.0 + 2.0 * lam;
            rhs[i] = lam * u[i - 1] + (1.0 - 2.0 * lam) * u[i] + lam * u[i + 1];
        }
        // Ghost-point rows at x = 0 and x = L. The off-diagonal entry is
        // -2 lam; the Robin term moves onto the diagonal.
        diag[0] = 1.0 + 2.0 * lam + dt * r1 / dx;
        rhs[0] = (1.0 - 2.0 * lam - dt * r0 / dx) * u[0]
            + 2.0 * lam * u[1]
            + dt / dx * ((spec.h0)(t0) + (spec.h0)(t1));
        diag[nx] = 1.0 + 2.0 * lam + dt * r1 / dx;
        rhs[nx] = (1.0 - 2.0 * lam - dt * r0 / dx) * u[nx]
            + 2.0 * lam * u[nx - 1]
            + dt / dx * ((spec.h1)(t0) + (spec.h1)(t1));

        if !thomas_solve(lam, nx, &mut diag, &mut rhs, &mut scratch) {
            return vec![f64::NAN; nt + 1];
        }
        u.copy_from_slice(&rhs);
        sensor.push(u[0]);
    }
    sensor
}

/// In-place Thomas solve of the CN system. The sub/super-diagonals are
/// `-2 lam` on the boundary rows and `-lam` elsewhere. Returns false on a
/// vanishing or non-finite pivot.
fn thomas_solve(
    lam: f64,
    nx: usize,
    diag: &mut [f64],
    rhs: &mut [f64],
    upper_scratch: &mut [f64],
) -> bool {
    let lower = |i: usize| if i == nx { -2.0 * lam } else { -lam };
    let upper = |i: usize| if i == 0 { -2.0 * lam } else { -lam };

    if !diag[0].is_finite() || diag[0].abs() < f64::MIN_POSITIVE {
        return false;
    }
    upper_scratch[0] = upper(0) / diag[0];
    rhs[0] /= diag[0];
    for i in 1..=nx {
        let denom = diag[i] - lower(i) * upper_scratch[i - 1];
        if !denom.is_finite() || denom.abs() < f64::MIN_POSITIVE {
            return false;
        }
        if i < nx {
            upper_scratch[i] = upper(i) / denom;
        }
        rhs[i] = (rhs[i] - lower(i) * rhs[i - 1]) / denom;
    }
    for i in (0..nx).rev() {
        rhs[i] -= upper_scratch[i] * rhs[i + 1];
    }
    rhs.iter().all(|v| v.is_finite())
}

/// The Robin problem as a forward model in the coefficient `rho`.
pub struct HeatModel {
    pub spec: HeatModelSpec,
}

impl ForwardModel for HeatModel {
    fn times(&self) -> &[f64] {
        self.spec.obs_times()
    }

    fn predict(&self, rho: &Field) -> Vec<f64> {
        solve_heat_robin(rho, &self.spec)
    }
}
