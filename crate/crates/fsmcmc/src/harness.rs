//! Experiment harness: config files, presets, artifact IO and the runner.
//!
//! An experiment is described either by a preset name or by explicit
//! `[prior]` / `[model]` blocks in a TOML config. The runner resolves the
//! config, generates or loads synthetic data, tunes the step size when asked
//! to, runs the requested samplers on independent RNG streams, and writes
//! chains, diagnostics and a JSON summary into one output directory.

pub mod config;
pub mod io;
pub mod presets;
pub mod runner;

pub use config::{
    load_config, DiagnosticsBlock, ExperimentConfig, ModelBlock, OutputBlock, PriorBlock,
    ResolvedExperiment, SamplerBlock, SamplerKind,
};
pub use presets::{nearest_preset, preset, preset_names, preset_table, PresetRow};
pub use runner::{run_experiment, RunSummary, SamplerReport};
