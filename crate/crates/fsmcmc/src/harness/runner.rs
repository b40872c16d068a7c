//! Experiment execution: data, tuning, chains, diagnostics, artifacts.

use std::collections::BTreeMap;

use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::diagnostics::{
    adaptation_decay, autocorrelation, decay_trend_is_bounded, effective_sample_size,
    pointwise_moments, ScalarSeries, ACF_ESTIMATOR, ESS_TRUNCATION,
};
use crate::grid::{Field, Grid};
use crate::harness::config::{
    BetaRule, JSelection, ModelBlock, ResolvedExperiment, SamplerKind,
};
use crate::harness::io;
use crate::models::{
    gaussian::GaussianPotential, heat::HeatModel, ode::OdeModel, GaussianPotentialSpec,
    HeatModelSpec, MisfitConvention, MisfitPotential, ObservationSet,
};
use crate::prior::{build_matern_covariance, kl_decompose, select_j, KlBasis, MaternParams};
use crate::samplers::{
    run_hybrid_chain, run_pcn_chain, tune_beta_with, Chain, CovarianceStructure, HybridConfig,
    PcnConfig, Potential, TuneOptions,
};

/// Fixed offsets deriving per-purpose RNG streams from the master seed.
const DATA_STREAM: u64 = 1;
const TUNE_STREAM: u64 = 2;
const SAMPLER_STREAM_BASE: u64 = 101;

fn sampler_stream(kind: SamplerKind) -> u64 {
    SAMPLER_STREAM_BASE
        + match kind {
            SamplerKind::Pcn => 0,
            SamplerKind::Hybrid => 1,
            SamplerKind::Diagonal => 2,
        }
}

/// Per-sampler results; the vectors stay in memory for tests and are not
/// serialized into the summary.
#[derive(Debug, Clone, Serialize)]
pub struct SamplerReport {
    pub n_samples: usize,
    pub n_prerun: usize,
    pub acceptance_rate: f64,
    pub prerun_acceptance_rate: Option<f64>,
    pub auto_rejects: usize,
    pub ess_per_100_median: f64,
    pub ess_per_100_min: f64,
    pub ess_per_100_max: f64,
    /// Whether the scaled covariance changes stayed trend-free (adaptive
    /// samplers only).
    pub adaptation_decay_bounded: Option<bool>,
    pub wall_ms: u128,
    #[serde(skip)]
    pub ess_per_100_points: Vec<f64>,
    #[serde(skip)]
    pub decay_series: Vec<f64>,
}

/// The JSON run summary: config echo plus headline numbers.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub grid_points: usize,
    pub j_dim: usize,
    /// The step size actually used (tuned or fixed).
    pub beta: f64,
    pub beta_rule: String,
    pub n_samples: usize,
    pub n_prerun: usize,
    pub thin: usize,
    pub acf_estimator: &'static str,
    pub ess_truncation: &'static str,
    pub wall_ms: u128,
    pub samplers: BTreeMap<String, SamplerReport>,
    pub files: BTreeMap<String, String>,
    /// Explicit config that reproduces this run byte-for-byte.
    pub config_toml: String,
}

enum ExperimentPotential {
    Gaussian(GaussianPotential),
    Ode(MisfitPotential<OdeModel>),
    Heat(MisfitPotential<HeatModel>),
}

impl Potential for ExperimentPotential {
    fn phi(&self, u: &Field) -> f64 {
        match self {
            ExperimentPotential::Gaussian(p) => p.phi(u),
            ExperimentPotential::Ode(p) => MisfitPotential::phi(p, u),
            ExperimentPotential::Heat(p) => MisfitPotential::phi(p, u),
        }
    }
}

/// Runs a resolved experiment end to end, writing all artifacts into its
/// output directory.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<RunSummary> {
    let started = Instant::now();
    std::fs::create_dir_all(&exp.out_dir)
        .with_context(|| format!("cannot create {}", exp.out_dir.display()))?;

    // Prior and KL basis.
    let grid = Arc::new(Grid::uniform(
        exp.prior.grid_points,
        exp.prior.domain_length,
    )?);
    let params = MaternParams::new(exp.prior.sigma, exp.prior.ell, exp.prior.nu)?;
    let cov = build_matern_covariance(&grid, &params)?;
    let basis = Arc::new(kl_decompose(&cov, &grid)?);

    let j_dim = match exp.j_selection {
        JSelection::Fixed(j) => j,
        JSelection::Fraction(rho) => select_j(basis.eigenvalues(), rho)?,
    };
    let r_threshold = exp
        .r_threshold
        .unwrap_or_else(|| HybridConfig::default_r_threshold(&basis));

    let mut files = BTreeMap::new();

    // Model, data, potential.
    let convention = if exp.misfit_halved {
        MisfitConvention::Halved
    } else {
        MisfitConvention::Unhalved
    };
    let potential = build_potential(exp, &grid, &basis, convention, &mut files)?;

    // Step size: fixed, or tuned on a throwaway pCN run and then frozen.
    let (beta, beta_rule) = match exp.beta_rule {
        BetaRule::Fixed(beta) => (beta, "fixed".to_string()),
        BetaRule::Tuned(target) => {
            let mut rng = ChaCha20Rng::seed_from_u64(exp.seed.wrapping_add(TUNE_STREAM));
            let initial = basis.sample_prior(&mut rng);
            let opts = TuneOptions {
                initial_beta: 0.5,
                batch_size: exp.tune_batch_size,
                n_batches: exp.tune_batches,
            };
            let beta = tune_beta_with(opts, target, &potential, &basis, &initial, &mut rng)?;
            (beta, format!("tuned(target_accept={target})"))
        }
    };

    // Run the requested samplers on independent streams, concurrently.
    let mut reports: BTreeMap<String, SamplerReport> = BTreeMap::new();
    let results: Vec<(SamplerKind, Result<(SamplerReport, Vec<String>)>)> =
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &kind in &exp.samplers {
                let basis = basis.clone();
                let potential = &potential;
                let exp_ref = exp;
                handles.push((
                    kind,
                    scope.spawn(move || {
                        run_one_sampler(exp_ref, kind, beta, j_dim, r_threshold, &basis, potential)
                    }),
                ));
            }
            handles
                .into_iter()
                .map(|(kind, h)| (kind, h.join().expect("sampler thread panicked")))
                .collect()
        });
    for (kind, result) in results {
        let (report, written) = result.with_context(|| format!("{kind} sampler failed"))?;
        for f in written {
            files.insert(f.clone(), f);
        }
        reports.insert(kind.label().to_string(), report);
    }

    let summary = RunSummary {
        name: exp.name.clone(),
        seed: exp.seed,
        grid_points: exp.prior.grid_points,
        j_dim,
        beta,
        beta_rule,
        n_samples: exp.n_samples,
        n_prerun: exp.n_prerun,
        thin: exp.effective_thin(),
        acf_estimator: ACF_ESTIMATOR,
        ess_truncation: ESS_TRUNCATION,
        wall_ms: started.elapsed().as_millis(),
        samplers: reports,
        files,
        config_toml: exp.echo_toml(),
    };
    let summary_path = exp.out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn build_potential(
    exp: &ResolvedExperiment,
    grid: &Arc<Grid>,
    basis: &Arc<KlBasis>,
    convention: MisfitConvention,
    files: &mut BTreeMap<String, String>,
) -> Result<ExperimentPotential> {
    match &exp.model {
        ModelBlock::Gaussian { k, coupling_delta } => {
            let spec = GaussianPotentialSpec::new(*k, *coupling_delta)?;
            Ok(ExperimentPotential::Gaussian(GaussianPotential {
                spec,
                basis: basis.clone(),
            }))
        }
        ModelBlock::Ode {
            x0,
            t_final,
            n_obs,
            noise_sd,
        } => {
            let model = OdeModel::with_uniform_observations(*x0, *t_final, *n_obs);
            let data = obtain_data(exp, grid, basis, &model, *noise_sd, files)?;
            let mut potential = MisfitPotential::new(model, data);
            potential.convention = convention;
            Ok(ExperimentPotential::Ode(potential))
        }
        ModelBlock::Heat {
            nx,
            nt,
            n_obs,
            noise_sd,
        } => {
            let spec = HeatModelSpec::benchmark(*nx, *nt).with_observation_times(
                (1..=*n_obs).map(|k| k as f64 / *n_obs as f64).collect(),
            );
            let model = HeatModel { spec };
            let data = obtain_data(exp, grid, basis, &model, *noise_sd, files)?;
            let mut potential = MisfitPotential::new(model, data);
            potential.convention = convention;
            Ok(ExperimentPotential::Heat(potential))
        }
    }
}

/// Loads observations from `data_file` when given; otherwise draws a truth
/// field from the prior on the data stream and simulates noisy observations,
/// writing both artifacts.
fn obtain_data<M: crate::models::ForwardModel>(
    exp: &ResolvedExperiment,
    _grid: &Arc<Grid>,
    basis: &Arc<KlBasis>,
    model: &M,
    noise_sd: f64,
    files: &mut BTreeMap<String, String>,
) -> Result<ObservationSet> {
    if let Some(path) = &exp.data_file {
        return io::read_observations(path, noise_sd);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(exp.seed.wrapping_add(DATA_STREAM));
    let truth = basis.sample_prior(&mut rng);
    let data = crate::models::simulate_data(&truth, model, noise_sd, &mut rng)?;
    let truth_path = exp.out_dir.join("truth.csv");
    let data_path = exp.out_dir.join("data.csv");
    io::write_field(&truth_path, &truth)?;
    io::write_observations(&data_path, &data)?;
    files.insert("truth.csv".into(), "truth.csv".into());
    files.insert("data.csv".into(), "data.csv".into());
    Ok(data)
}

fn run_one_sampler(
    exp: &ResolvedExperiment,
    kind: SamplerKind,
    beta: f64,
    j_dim: usize,
    r_threshold: f64,
    basis: &Arc<KlBasis>,
    potential: &ExperimentPotential,
) -> Result<(SamplerReport, Vec<String>)> {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(exp.seed.wrapping_add(sampler_stream(kind)));
    let initial = basis.sample_prior(&mut rng);

    let chain = match kind {
        SamplerKind::Pcn => {
            // No adaptation: the pre-run budget goes into the chain itself.
            let config = PcnConfig {
                beta,
                n_samples: exp.n_samples + exp.n_prerun,
                seed: exp.seed,
            };
            run_pcn_chain(&config, potential, basis, initial, &mut rng)?
        }
        SamplerKind::Hybrid | SamplerKind::Diagonal => {
            let config = HybridConfig {
                beta,
                j_dim,
                n_prerun: exp.n_prerun,
                n_samples: exp.n_samples,
                delta_reg: exp.delta_reg,
                r_threshold,
                seed: exp.seed,
                snapshot_stride: exp.snapshot_stride,
                structure: if kind == SamplerKind::Diagonal {
                    CovarianceStructure::Diagonal
                } else {
                    CovarianceStructure::Full
                },
            };
            run_hybrid_chain(&config, potential, basis, initial, &mut rng)?
        }
    };

    let label = kind.label();
    let mut written = Vec::new();

    let chain_file = format!("chain_{label}.csv");
    let file = std::fs::File::create(exp.out_dir.join(&chain_file))?;
    chain.write_csv(std::io::BufWriter::new(file), exp.effective_thin())?;
    written.push(chain_file);

    let (diag, ess_points, acf_columns) = chain_diagnostics(exp, &chain)?;
    let diag_file = format!("diag_{label}.csv");
    io::write_diagnostics(&exp.out_dir.join(&diag_file), &diag)?;
    written.push(diag_file);
    let acf_file = format!("acf_{label}.csv");
    io::write_acf_table(&exp.out_dir.join(&acf_file), &exp.acf_points, &acf_columns)?;
    written.push(acf_file);

    let decay_series = if chain.sigma_snapshots.len() >= 2 {
        adaptation_decay(&chain.sigma_snapshots)?
    } else {
        Vec::new()
    };
    let decay_bounded = match kind {
        SamplerKind::Pcn => None,
        _ => Some(decay_trend_is_bounded(&decay_series)),
    };

    let mut finite_ess: Vec<f64> = ess_points.iter().copied().filter(|e| e.is_finite()).collect();
    finite_ess.sort_by(f64::total_cmp);
    let median = percentile(&finite_ess, 0.5);

    let report = SamplerReport {
        n_samples: chain.len(),
        n_prerun: chain.prerun_proposal_count,
        acceptance_rate: chain.acceptance_rate(),
        prerun_acceptance_rate: (chain.prerun_proposal_count > 0)
            .then(|| chain.prerun_acceptance_rate()),
        auto_rejects: chain.auto_reject_count,
        ess_per_100_median: median,
        ess_per_100_min: finite_ess.first().copied().unwrap_or(f64::NAN),
        ess_per_100_max: finite_ess.last().copied().unwrap_or(f64::NAN),
        adaptation_decay_bounded: decay_bounded,
        wall_ms: started.elapsed().as_millis(),
        ess_per_100_points: ess_points,
        decay_series,
    };
    Ok((report, written))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Per-point diagnostics table, per-point ESS column, and the per-lag ACF
/// columns at the configured sample points.
fn chain_diagnostics(
    exp: &ResolvedExperiment,
    chain: &Chain,
) -> Result<(io::DiagnosticsTable, Vec<f64>, Vec<Vec<f64>>)> {
    let grid = chain.states[0].grid().clone();
    let (mean, var) = pointwise_moments(chain)?;
    let max_lag = exp.max_lag.min(chain.len().saturating_sub(1));

    let mut rows = Vec::with_capacity(grid.len());
    let mut ess_points = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let series = ScalarSeries::new(chain.series_at(k));
        let (acf_val, ess100) = match &series {
            Ok(s) => {
                let acf = autocorrelation(s, max_lag).map(|a| a[max_lag]);
                let ess = effective_sample_size(s).map(|e| e * 100.0 / s.len() as f64);
                (acf.unwrap_or(f64::NAN), ess.unwrap_or(f64::NAN))
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        ess_points.push(ess100);
        rows.push([
            grid.points()[k],
            acf_val,
            ess100,
            mean.values()[k],
            var.values()[k],
        ]);
    }

    let mut acf_columns = Vec::new();
    for &x in &exp.acf_points {
        let k = grid.nearest_index(x);
        let col = match ScalarSeries::new(chain.series_at(k)) {
            Ok(s) => autocorrelation(&s, max_lag).unwrap_or_else(|_| vec![f64::NAN; max_lag + 1]),
            Err(_) => vec![f64::NAN; max_lag + 1],
        };
        acf_columns.push(col);
    }

    Ok((
        io::DiagnosticsTable {
            rows,
            acf_lag: max_lag,
        },
        ess_points,
        acf_columns,
    ))
}
