//! Built-in experiment presets covering the three benchmark studies.

use crate::harness::config::{
    DiagnosticsBlock, ExperimentConfig, ModelBlock, PriorBlock, SamplerBlock,
};

/// One row of the preset table.
#[derive(Debug, Clone)]
pub struct PresetRow {
    pub names: &'static str,
    pub scenario: &'static str,
    pub settings: &'static str,
}

const PRESET_NAMES: [&str; 7] = [
    "gauss-weak",
    "gauss-strong",
    "ode-1",
    "ode-2-J5",
    "ode-2-J10",
    "ode-2-J20",
    "robin",
];

pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// The documented preset table. The three `ode-2-J*` variants share a row:
/// they differ only in the adapted-subspace dimension.
pub fn preset_table() -> Vec<PresetRow> {
    vec![
        PresetRow {
            names: "gauss-weak",
            scenario: "closed-form Gaussian posterior, weakly coupled coefficients",
            settings: "K = 14, coupling Delta = 1, sigma = ell = 1, J = 14",
        },
        PresetRow {
            names: "gauss-strong",
            scenario: "closed-form Gaussian posterior, strongly coupled coefficients",
            settings: "K = 14, coupling Delta = 14, sigma = ell = 1, J = 14",
        },
        PresetRow {
            names: "ode-1",
            scenario: "decay-ODE coefficient inversion, smooth prior",
            settings: "sigma = 1, ell = 1, 50 obs, noise 0.1, J = 14",
        },
        PresetRow {
            names: "ode-2-J5 | ode-2-J10 | ode-2-J20",
            scenario: "decay-ODE inversion, rough prior; subspace-dimension study",
            settings: "sigma = 1, ell = 0.2, 50 obs, noise 0.1, J in {5, 10, 20}",
        },
        PresetRow {
            names: "robin",
            scenario: "heat-equation Robin-coefficient inversion, sensor at x = 0",
            settings: "sigma = ell = 1, 200 obs (every T/200), noise 0.1, J = 14",
        },
    ]
}

fn smooth_prior() -> PriorBlock {
    PriorBlock {
        sigma: 1.0,
        ell: 1.0,
        nu: 2.5,
        grid_points: 201,
        domain_length: 1.0,
    }
}

fn rough_prior() -> PriorBlock {
    PriorBlock {
        ell: 0.2,
        ..smooth_prior()
    }
}

fn base(prior: PriorBlock, model: ModelBlock, j: usize, acf_points: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        seed: Some(12345),
        j: Some(j),
        target_accept: Some(0.25),
        prior: Some(prior),
        model: Some(model),
        sampler: Some(SamplerBlock::default()),
        diagnostics: Some(DiagnosticsBlock {
            max_lag: Some(100),
            acf_points: Some(acf_points),
        }),
        ..ExperimentConfig::default()
    }
}

fn ode_model() -> ModelBlock {
    ModelBlock::Ode {
        x0: 1.0,
        t_final: 1.0,
        n_obs: 50,
        noise_sd: 0.1,
    }
}

/// Looks up a preset as a fully explicit config.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "gauss-weak" => base(
            smooth_prior(),
            ModelBlock::Gaussian {
                k: 14,
                coupling_delta: 1.0,
            },
            14,
            vec![0.4, 0.8],
        ),
        "gauss-strong" => base(
            smooth_prior(),
            ModelBlock::Gaussian {
                k: 14,
                coupling_delta: 14.0,
            },
            14,
            vec![0.4, 0.8],
        ),
        "ode-1" => base(smooth_prior(), ode_model(), 14, vec![0.4, 0.8]),
        "ode-2-J5" => base(rough_prior(), ode_model(), 5, vec![0.4, 0.8]),
        "ode-2-J10" => base(rough_prior(), ode_model(), 10, vec![0.4, 0.8]),
        "ode-2-J20" => base(rough_prior(), ode_model(), 20, vec![0.4, 0.8]),
        "robin" => base(
            smooth_prior(),
            ModelBlock::Heat {
                nx: 100,
                nt: 200,
                n_obs: 200,
                noise_sd: 0.1,
            },
            14,
            vec![0.1, 0.5],
        ),
        _ => return None,
    };
    Some(cfg)
}

/// Closest preset name by edit distance, for error messages.
pub fn nearest_preset(name: &str) -> &'static str {
    PRESET_NAMES
        .iter()
        .min_by_key(|candidate| levenshtein(name, candidate))
        .copied()
        .unwrap_or("gauss-weak")
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            let next = (prev + cost).min(row[j] + 1).min(row[j + 1] + 1);
            prev = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::JSelection;

    #[test]
    fn every_preset_name_resolves() {
        for name in preset_names() {
            let cfg = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            cfg.validate()
                .unwrap_or_else(|e| panic!("{name} invalid: {e}"));
            let from_name = ExperimentConfig::from_preset(name);
            from_name.validate().unwrap();
            from_name.resolve().unwrap();
        }
    }

    #[test]
    fn table_covers_every_runnable_name() {
        let table = preset_table();
        assert_eq!(table.len(), 5);
        let joined: String = table.iter().map(|r| r.names).collect();
        for name in preset_names() {
            assert!(joined.contains(name), "{name} missing from table");
        }
    }

    #[test]
    fn gauss_strong_carries_the_strong_coupling_values() {
        let r = ExperimentConfig::from_preset("gauss-strong").resolve().unwrap();
        assert_eq!(
            r.model,
            ModelBlock::Gaussian {
                k: 14,
                coupling_delta: 14.0
            }
        );
        assert_eq!(r.j_selection, JSelection::Fixed(14));
        assert_eq!(r.prior.sigma, 1.0);
        assert_eq!(r.prior.ell, 1.0);
        assert_eq!(r.prior.nu, 2.5);
        assert_eq!(r.prior.grid_points, 201);
    }

    #[test]
    fn ode_presets_match_the_study_settings() {
        let r = ExperimentConfig::from_preset("ode-1").resolve().unwrap();
        assert_eq!(r.prior.ell, 1.0);
        assert_eq!(r.j_selection, JSelection::Fixed(14));
        match r.model {
            ModelBlock::Ode {
                n_obs, noise_sd, ..
            } => {
                assert_eq!(n_obs, 50);
                assert_eq!(noise_sd, 0.1);
            }
            other => panic!("wrong model {other:?}"),
        }
        let r10 = ExperimentConfig::from_preset("ode-2-J10").resolve().unwrap();
        assert_eq!(r10.prior.ell, 0.2);
        assert_eq!(r10.j_selection, JSelection::Fixed(10));
    }

    #[test]
    fn robin_preset_reads_every_t_over_200() {
        let r = ExperimentConfig::from_preset("robin").resolve().unwrap();
        match r.model {
            ModelBlock::Heat { n_obs, nx, nt, .. } => {
                assert_eq!(n_obs, 200);
                assert_eq!(nx, 100);
                assert_eq!(nt, 200);
            }
            other => panic!("wrong model {other:?}"),
        }
        assert_eq!(r.acf_points, vec![0.1, 0.5]);
    }

    #[test]
    fn nearest_preset_handles_typos() {
        assert_eq!(nearest_preset("gauss-stong"), "gauss-strong");
        assert_eq!(nearest_preset("robn"), "robin");
        assert_eq!(nearest_preset("ode-2-J1"), "ode-2-J10");
    }
}
