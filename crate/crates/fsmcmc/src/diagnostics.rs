//! Chain diagnostics: autocorrelation, effective sample size, pointwise
//! moments and the diminishing-adaptation monitor.
//!
//! The ACF uses the biased (divide-by-n) estimator, computed via FFT so that
//! full-length correlograms stay cheap. ESS truncates the correlogram with
//! Geyer's initial-positive-sequence rule: sum lags until the first pairwise
//! sum `rho_{2m} + rho_{2m+1}` turns non-positive. Both choices are recorded
//! in run summaries so emitted figures are self-describing.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::samplers::{Chain, SigmaSnapshot};

/// Name of the ACF estimator, echoed into run summaries.
pub const ACF_ESTIMATOR: &str = "biased";
/// Name of the ESS truncation rule, echoed into run summaries.
pub const ESS_TRUNCATION: &str = "geyer-initial-positive";

/// A scalar chain extracted at one grid point or one coefficient.
#[derive(Debug, Clone)]
pub struct ScalarSeries {
    values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateSeries("series is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSeries(
                "series contains non-finite entries".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Full biased autocovariance sequence `c_0..c_{n-1}` via FFT.
fn autocovariance(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = values
        .iter()
        .map(|v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();

    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    // rustfft leaves the inverse unnormalized (factor `size`); the biased
    // estimator then divides by n.
    let scale = 1.0 / (size as f64 * n as f64);
    buf.iter().take(n).map(|z| z.re * scale).collect()
}

/// Autocorrelation `rho_0..rho_max_lag` with the biased estimator.
///
/// Fails on zero-variance series, where the ratio is undefined.
pub fn autocorrelation(series: &ScalarSeries, max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::InvalidParameter {
            name: "max_lag",
            reason: format!(
                "series of length {} supports lags up to {}",
                series.len(),
                series.len() - 1
            ),
        });
    }
    let acov = autocovariance(series.values());
    let c0 = acov[0];
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::DegenerateSeries(
            "zero-variance series has no autocorrelation".into(),
        ));
    }
    Ok(acov[..=max_lag].iter().map(|c| c / c0).collect())
}

/// Effective sample size `n / (1 + 2 sum_{k=1}^{K*} rho_k)` with `K*` from
/// Geyer's initial-positive-sequence rule.
pub fn effective_sample_size(series: &ScalarSeries) -> Result<f64> {
    let n = series.len();
    let acov = autocovariance(series.values());
    let c0 = acov[0];
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::DegenerateSeries(
            "zero-variance series has no effective sample size".into(),
        ));
    }
    let rho: Vec<f64> = acov.iter().map(|c| c / c0).collect();

    // Sum pairwise: include (rho_{2m}, rho_{2m+1}) while the pair sum stays
    // positive, then stop.
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    // An antithetic first pair can leave tau at its -1 start; clamp so the
    // estimate stays positive and finite.
    let tau = tau.max(2.0 / n as f64);
    Ok(n as f64 / tau)
}

/// ESS scaled per 100 samples, the unit used for per-grid-point comparisons.
pub fn ess_per_100(series: &ScalarSeries) -> Result<f64> {
    Ok(effective_sample_size(series)? * 100.0 / series.len() as f64)
}

/// Per-grid-point sample mean and unbiased variance over the stored states.
pub fn pointwise_moments(chain: &Chain) -> Result<(Field, Field)> {
    if chain.is_empty() {
        return Err(Error::DegenerateSeries("chain has no states".into()));
    }
    let grid = chain.states[0].grid().clone();
    let n_pts = grid.len();
    let n = chain.len() as f64;
    let mut mean = vec![0.0; n_pts];
    for u in &chain.states {
        for (m, v) in mean.iter_mut().zip(u.values()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; n_pts];
    if chain.len() > 1 {
        for u in &chain.states {
            for ((s, v), m) in var.iter_mut().zip(u.values()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in var.iter_mut() {
            *s /= n - 1.0;
        }
    }
    Ok((Field::new(mean, grid.clone())?, Field::new(var, grid)?))
}

/// Scaled per-step covariance changes `n_k ||S_k - S_{k+1}||_F / (steps)`.
///
/// The scaling follows the `gamma / n` bound of the diminishing-adaptation
/// argument: per-step changes shrink like `1/n`, so the scaled series should
/// stay bounded with no upward trend.
pub fn adaptation_decay(snapshots: &[SigmaSnapshot]) -> Result<Vec<f64>> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "snapshots",
            reason: format!("need at least 2 snapshots, got {}", snapshots.len()),
        });
    }
    Ok(snapshots
        .windows(2)
        .map(|w| {
            let steps = (w[1].iteration - w[0].iteration).max(1) as f64;
            let diff = (&w[1].sigma - &w[0].sigma).norm();
            w[0].absorbed as f64 * diff / steps
        })
        .collect())
}

/// The monitor's trend check: the maximum over the last quartile must not
/// exceed twice the maximum over the first quartile.
pub fn decay_trend_is_bounded(decay: &[f64]) -> bool {
    if decay.is_empty() {
        return true;
    }
    let q = (decay.len() / 4).max(1);
    let first_max = decay[..q].iter().cloned().fold(0.0f64, f64::max);
    let last_max = decay[decay.len() - q..]
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    last_max <= 2.0 * first_max + 1e-15
}
