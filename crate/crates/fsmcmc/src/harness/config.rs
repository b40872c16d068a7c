//! Experiment configuration: the TOML schema, validation and resolution.
//!
//! The file format is flat key-value TOML with optional section blocks.
//! Exactly one of `preset = "..."` or the explicit `[prior]` + `[model]`
//! blocks must be present. Unknown keys are rejected. Top-level scalars
//! (seed, counts, `j`/`rho`, `beta`/`target_accept`) apply in both modes and
//! override preset values.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::presets;

/// Which sampler(s) an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Pcn,
    Hybrid,
    /// The hybrid algorithm restricted to a diagonal subspace covariance.
    /// A stand-in baseline; not a reimplementation of any published sampler.
    Diagonal,
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::Pcn => "pcn",
            SamplerKind::Hybrid => "hybrid",
            SamplerKind::Diagonal => "diagonal",
        }
    }

    pub fn all() -> [SamplerKind; 3] {
        [SamplerKind::Pcn, SamplerKind::Hybrid, SamplerKind::Diagonal]
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Prior block: Matérn parameters and grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorBlock {
    pub sigma: f64,
    pub ell: f64,
    /// Smoothness order; only 5/2 is supported.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_domain_length")]
    pub domain_length: f64,
}

fn default_nu() -> f64 {
    2.5
}
fn default_grid_points() -> usize {
    201
}
fn default_domain_length() -> f64 {
    1.0
}

/// Model block: which potential, and its data parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum ModelBlock {
    /// Quadratic coefficient potential with coupling `exp(-(i-j)^2/Delta)`.
    Gaussian {
        k: usize,
        coupling_delta: f64,
    },
    /// Decay ODE observed at `n_obs` uniform instants.
    Ode {
        #[serde(default = "default_x0")]
        x0: f64,
        #[serde(default = "default_t_final")]
        t_final: f64,
        #[serde(default = "default_ode_n_obs")]
        n_obs: usize,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
    /// Robin-coefficient heat problem with a sensor at x = 0.
    Heat {
        #[serde(default = "default_heat_nx")]
        nx: usize,
        #[serde(default = "default_heat_nt")]
        nt: usize,
        #[serde(default = "default_heat_n_obs")]
        n_obs: usize,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
}

fn default_x0() -> f64 {
    1.0
}
fn default_t_final() -> f64 {
    1.0
}
fn default_ode_n_obs() -> usize {
    50
}
fn default_noise_sd() -> f64 {
    0.1
}
fn default_heat_nx() -> usize {
    100
}
fn default_heat_nt() -> usize {
    200
}
fn default_heat_n_obs() -> usize {
    200
}

/// Fine-grained sampler settings with universal defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    /// Covariance regularizer; default 1e-8.
    pub delta_reg: Option<f64>,
    /// Norm-gate threshold; default `10 sqrt(sum alpha_j)`.
    pub r_threshold: Option<f64>,
    /// Covariance snapshot stride; default 1000.
    pub snapshot_stride: Option<usize>,
    /// Step-size tuning: proposals per batch (default 200) and batch count
    /// (default 25).
    pub tune_batch_size: Option<usize>,
    pub tune_batches: Option<usize>,
    /// Keep the 1/2 factor in the misfit (default true). Setting this false
    /// reproduces the plain squared-norm convention.
    pub misfit_halved: Option<bool>,
}

/// Diagnostics settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    /// Maximum ACF lag for the per-point column and the per-lag table
    /// (default 100).
    pub max_lag: Option<usize>,
    /// Grid coordinates at which per-lag ACF tables are emitted.
    pub acf_points: Option<Vec<f64>>,
}

/// Output settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    /// Chain CSV thinning stride; default keeps about 5000 rows.
    pub thin: Option<usize>,
}

/// The on-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of a built-in preset. Mutually exclusive with the explicit
    /// `[prior]` + `[model]` blocks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_prerun: Option<usize>,
    /// Adapted-subspace dimension. Mutually exclusive with `rho`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Spectrum fraction from which the dimension is derived.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Fixed step size. Mutually exclusive with `target_accept`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Acceptance rate the tuner aims for (default 0.25 when neither is given).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_accept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samplers: Option<Vec<SamplerKind>>,
    /// Overrides the prior's grid resolution (mesh-robustness checks).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Reuse observations from an earlier run instead of simulating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputBlock>,
}

/// Configuration errors carry enough context to point at the offending key.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}:\n{message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset `{name}`; did you mean `{nearest}`?")]
    UnknownPreset { name: String, nearest: String },
}

/// How the subspace dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JSelection {
    Fixed(usize),
    /// Smallest J capturing more than this fraction of the spectrum.
    Fraction(f64),
}

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BetaRule {
    Fixed(f64),
    /// Tune towards this acceptance rate, then freeze.
    Tuned(f64),
}

/// A fully-resolved experiment, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExperiment {
    pub name: String,
    pub seed: u64,
    pub samplers: Vec<SamplerKind>,
    pub prior: PriorBlock,
    pub model: ModelBlock,
    pub n_samples: usize,
    pub n_prerun: usize,
    pub j_selection: JSelection,
    pub beta_rule: BetaRule,
    pub delta_reg: f64,
    pub r_threshold: Option<f64>,
    pub snapshot_stride: usize,
    pub tune_batch_size: usize,
    pub tune_batches: usize,
    pub misfit_halved: bool,
    pub max_lag: usize,
    pub acf_points: Vec<f64>,
    pub out_dir: PathBuf,
    pub thin: Option<usize>,
    pub data_file: Option<PathBuf>,
}

/// Desk-scale default counts; the full-scale protocol sits behind
/// `--paper-scale`.
pub const DESK_SAMPLES: usize = 50_000;
pub const DESK_PRERUN: usize = 5_000;
pub const FULL_SAMPLES: usize = 500_000;
pub const FULL_PRERUN: usize = 50_000;

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    /// A config that just names a preset.
    pub fn from_preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    /// Structural validation: exclusivity rules and positive counts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let has_blocks = self.prior.is_some() || self.model.is_some();
        match (&self.preset, has_blocks) {
            (Some(_), true) => {
                return Err(ConfigError::Invalid(
                    "give either `preset` or explicit [prior]/[model] blocks, not both".into(),
                ))
            }
            (None, false) => {
                return Err(ConfigError::Invalid(
                    "config needs `preset` or explicit [prior] and [model] blocks".into(),
                ))
            }
            (None, true) => {
                if self.prior.is_none() || self.model.is_none() {
                    return Err(ConfigError::Invalid(
                        "explicit mode needs both [prior] and [model] blocks".into(),
                    ));
                }
            }
            (Some(name), false) => {
                if presets::preset(name).is_none() {
                    return Err(ConfigError::UnknownPreset {
                        name: name.clone(),
                        nearest: presets::nearest_preset(name).to_string(),
                    });
                }
            }
        }
        if self.j.is_some() && self.rho.is_some() {
            return Err(ConfigError::Invalid(
                "`j` and `rho` are mutually exclusive".into(),
            ));
        }
        if self.beta.is_some() && self.target_accept.is_some() {
            return Err(ConfigError::Invalid(
                "`beta` and `target_accept` are mutually exclusive".into(),
            ));
        }
        for (key, value) in [("n_samples", self.n_samples), ("n_prerun", self.n_prerun)] {
            if value == Some(0) {
                return Err(ConfigError::Invalid(format!("`{key}` must be positive")));
            }
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "`rho` must lie in (0, 1), got {rho}"
                )));
            }
        }
        if let Some(beta) = self.beta {
            if !(0.0..=1.0).contains(&beta) {
                return Err(ConfigError::Invalid(format!(
                    "`beta` must lie in [0, 1], got {beta}"
                )));
            }
        }
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "`target_accept` must lie in (0, 1), got {t}"
                )));
            }
        }
        if let Some(samplers) = &self.samplers {
            if samplers.is_empty() {
                return Err(ConfigError::Invalid("`samplers` must not be empty".into()));
            }
        }
        if let Some(g) = self.grid_points {
            if g < 2 {
                return Err(ConfigError::Invalid(format!(
                    "`grid_points` must be at least 2, got {g}"
                )));
            }
        }
        Ok(())
    }

    /// Applies preset values and defaults, producing a runnable description.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        self.validate()?;
        // Start from the preset, then layer this config's overrides on top.
        let (name, base) = match &self.preset {
            Some(name) => (
                name.clone(),
                presets::preset(name).expect("validated above"),
            ),
            None => ("custom".to_string(), self.clone()),
        };

        let mut prior = base
            .prior
            .clone()
            .ok_or_else(|| ConfigError::Invalid("missing [prior] block".into()))?;
        let model = base
            .model
            .clone()
            .ok_or_else(|| ConfigError::Invalid("missing [model] block".into()))?;
        if let Some(g) = self.grid_points.or(base.grid_points) {
            prior.grid_points = g;
        }

        let j_selection = match (self.j.or(base.j), self.rho.or(base.rho)) {
            (Some(j), _) => JSelection::Fixed(j),
            (None, Some(rho)) => JSelection::Fraction(rho),
            (None, None) => JSelection::Fraction(0.9),
        };
        let beta_rule = match (self.beta.or(base.beta), self.target_accept.or(base.target_accept))
        {
            (Some(beta), _) => BetaRule::Fixed(beta),
            (None, Some(t)) => BetaRule::Tuned(t),
            (None, None) => BetaRule::Tuned(0.25),
        };

        let sampler = self
            .sampler
            .clone()
            .or_else(|| base.sampler.clone())
            .unwrap_or_default();
        let diagnostics = self
            .diagnostics
            .clone()
            .or_else(|| base.diagnostics.clone())
            .unwrap_or_default();
        let output = self
            .output
            .clone()
            .or_else(|| base.output.clone())
            .unwrap_or_default();

        let out_dir = output
            .dir
            .unwrap_or_else(|| PathBuf::from("runs").join(&name));
        let acf_points = diagnostics
            .acf_points
            .unwrap_or_else(|| default_acf_points(&model));

        Ok(ResolvedExperiment {
            seed: self.seed.or(base.seed).unwrap_or(12345),
            samplers: self
                .samplers
                .clone()
                .or_else(|| base.samplers.clone())
                .unwrap_or_else(|| SamplerKind::all().to_vec()),
            prior,
            model,
            n_samples: self.n_samples.or(base.n_samples).unwrap_or(DESK_SAMPLES),
            n_prerun: self.n_prerun.or(base.n_prerun).unwrap_or(DESK_PRERUN),
            j_selection,
            beta_rule,
            delta_reg: sampler.delta_reg.unwrap_or(1e-8),
            r_threshold: sampler.r_threshold,
            snapshot_stride: sampler.snapshot_stride.unwrap_or(1000),
            tune_batch_size: sampler.tune_batch_size.unwrap_or(200),
            tune_batches: sampler.tune_batches.unwrap_or(25),
            misfit_halved: sampler.misfit_halved.unwrap_or(true),
            max_lag: diagnostics.max_lag.unwrap_or(100),
            acf_points,
            out_dir,
            thin: output.thin,
            data_file: self.data_file.clone().or_else(|| base.data_file.clone()),
            name,
        })
    }
}

fn default_acf_points(model: &ModelBlock) -> Vec<f64> {
    match model {
        ModelBlock::Heat { .. } => vec![0.1, 0.5],
        _ => vec![0.4, 0.8],
    }
}

impl ResolvedExperiment {
    /// The explicit-form config that reproduces this experiment exactly.
    /// Embedded in run summaries so a summary alone can re-run the study.
    pub fn echo_config(&self) -> ExperimentConfig {
        let (j, rho) = match self.j_selection {
            JSelection::Fixed(j) => (Some(j), None),
            JSelection::Fraction(r) => (None, Some(r)),
        };
        let (beta, target) = match self.beta_rule {
            BetaRule::Fixed(b) => (Some(b), None),
            BetaRule::Tuned(t) => (None, Some(t)),
        };
        ExperimentConfig {
            preset: None,
            seed: Some(self.seed),
            n_samples: Some(self.n_samples),
            n_prerun: Some(self.n_prerun),
            j,
            rho,
            beta,
            target_accept: target,
            samplers: Some(self.samplers.clone()),
            grid_points: None,
            data_file: self.data_file.clone(),
            prior: Some(self.prior.clone()),
            model: Some(self.model.clone()),
            sampler: Some(SamplerBlock {
                delta_reg: Some(self.delta_reg),
                r_threshold: self.r_threshold,
                snapshot_stride: Some(self.snapshot_stride),
                tune_batch_size: Some(self.tune_batch_size),
                tune_batches: Some(self.tune_batches),
                misfit_halved: Some(self.misfit_halved),
            }),
            diagnostics: Some(DiagnosticsBlock {
                max_lag: Some(self.max_lag),
                acf_points: Some(self.acf_points.clone()),
            }),
            output: Some(OutputBlock {
                dir: Some(self.out_dir.clone()),
                thin: self.thin,
            }),
        }
    }

    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(&self.echo_config()).expect("config serializes")
    }

    /// Chain CSV stride: configured, or sized to keep about 5000 rows.
    pub fn effective_thin(&self) -> usize {
        self.thin
            .unwrap_or_else(|| (self.n_samples / 5000).max(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_and_blocks_are_mutually_exclusive() {
        let mut c = ExperimentConfig::from_preset("gauss-weak");
        c.prior = Some(PriorBlock {
            sigma: 1.0,
            ell: 1.0,
            nu: 2.5,
            grid_points: 201,
            domain_length: 1.0,
        });
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn empty_config_is_rejected() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_preset_suggests_nearest() {
        let c = ExperimentConfig::from_preset("gauss-stong");
        match c.validate() {
            Err(ConfigError::UnknownPreset { nearest, .. }) => {
                assert_eq!(nearest, "gauss-strong");
            }
            other => panic!("expected UnknownPreset, got {other:?}"),
        }
    }

    #[test]
    fn j_and_rho_conflict() {
        let mut c = ExperimentConfig::from_preset("ode-1");
        c.j = Some(5);
        c.rho = Some(0.9);
        assert!(c.validate().is_err());
    }

    #[test]
    fn beta_and_target_conflict() {
        let mut c = ExperimentConfig::from_preset("ode-1");
        c.beta = Some(0.3);
        c.target_accept = Some(0.25);
        assert!(c.validate().is_err());
    }

    #[test]
    fn overrides_take_precedence_over_preset_values() {
        let mut c = ExperimentConfig::from_preset("gauss-strong");
        c.seed = Some(7);
        c.n_samples = Some(1000);
        c.grid_points = Some(101);
        let r = c.resolve().unwrap();
        assert_eq!(r.seed, 7);
        assert_eq!(r.n_samples, 1000);
        assert_eq!(r.prior.grid_points, 101);
        assert_eq!(r.j_selection, JSelection::Fixed(14));
    }

    #[test]
    fn toml_round_trip_through_echo() {
        let r = ExperimentConfig::from_preset("ode-2-J10").resolve().unwrap();
        let text = r.echo_toml();
        let parsed: ExperimentConfig = toml::from_str(&text).unwrap();
        parsed.validate().unwrap();
        let r2 = parsed.resolve().unwrap();
        assert_eq!(r.prior, r2.prior);
        assert_eq!(r.model, r2.model);
        assert_eq!(r.seed, r2.seed);
        assert_eq!(r.j_selection, r2.j_selection);
        assert_eq!(r.beta_rule, r2.beta_rule);
        assert_eq!(r.n_samples, r2.n_samples);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ExperimentConfig>("preset = \"ode-1\"\nbogus_key = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("bogus_key") || err.contains("unknown"), "{err}");
    }

    #[test]
    fn parse_errors_carry_location_information() {
        let err = toml::from_str::<ExperimentConfig>("preset = [broken\n")
            .unwrap_err()
            .to_string();
        // The TOML error shows the offending line.
        assert!(err.contains("line 1") || err.contains('1'), "{err}");
    }
}
