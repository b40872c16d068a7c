//! Command-line front end: run experiments, list presets, diagnose chains.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fsmcmc::diagnostics::{autocorrelation, effective_sample_size, ScalarSeries};
use fsmcmc::harness::{self, config, io, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fsmcmc", version, about = "Function-space MCMC experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a named preset.
    Run(RunArgs),
    /// List the built-in presets.
    Presets,
    /// Recompute per-point diagnostics from a chain CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML experiment config. Omit when using --preset.
    config: Option<PathBuf>,
    /// Name of a built-in preset (see `fsmcmc presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Measured-phase sample count override.
    #[arg(long)]
    samples: Option<usize>,
    /// Pre-run length override.
    #[arg(long)]
    prerun: Option<usize>,
    /// Use the full-scale protocol (5e5 samples + 5e4 pre-run).
    #[arg(long)]
    paper_scale: bool,
    /// Grid resolution override (mesh-robustness checks).
    #[arg(long)]
    grid_points: Option<usize>,
    /// Output directory (default: runs/<name>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Reuse observations from an earlier run's data.csv.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Also export the KL basis (mode index, eigenvalue, grid values).
    #[arg(long)]
    export_basis: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Chain CSV produced by `run` (iteration,phi,u_0,...).
    chain: PathBuf,
    /// Maximum ACF lag.
    #[arg(long, default_value_t = 100)]
    max_lag: usize,
    /// Domain length the grid columns span.
    #[arg(long, default_value_t = 1.0)]
    domain_length: f64,
    /// Output CSV path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Presets => {
            print_presets();
            Ok(())
        }
        Command::Diagnose(args) => diagnose(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => harness::load_config(path)?,
        (None, Some(name)) => {
            let c = ExperimentConfig::from_preset(name);
            c.validate()?;
            c
        }
        (None, None) => bail!("give a config file or --preset NAME"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if args.paper_scale {
        config.n_samples = Some(config::FULL_SAMPLES);
        config.n_prerun = Some(config::FULL_PRERUN);
    }
    if let Some(samples) = args.samples {
        config.n_samples = Some(samples);
    }
    if let Some(prerun) = args.prerun {
        config.n_prerun = Some(prerun);
    }
    if let Some(g) = args.grid_points {
        config.grid_points = Some(g);
    }
    if let Some(data) = args.data {
        config.data_file = Some(data);
    }

    let mut resolved = config.resolve()?;
    if let Some(out) = args.out {
        resolved.out_dir = out;
    }

    if args.export_basis {
        export_basis(&resolved)?;
    }

    let summary = harness::run_experiment(&resolved)?;
    println!(
        "{}: wrote {} (beta = {:.4}, J = {})",
        summary.name,
        resolved.out_dir.join("summary.json").display(),
        summary.beta,
        summary.j_dim
    );
    for (label, report) in &summary.samplers {
        println!(
            "  {label:<8} acceptance {:.3}  median ESS/100 {:.3}  ({} samples, {} ms)",
            report.acceptance_rate, report.ess_per_100_median, report.n_samples, report.wall_ms
        );
    }
    Ok(())
}

fn export_basis(resolved: &config::ResolvedExperiment) -> Result<()> {
    use fsmcmc::{build_matern_covariance, kl_decompose, Grid, MaternParams};
    use std::sync::Arc;
    std::fs::create_dir_all(&resolved.out_dir)?;
    let grid = Arc::new(Grid::uniform(
        resolved.prior.grid_points,
        resolved.prior.domain_length,
    )?);
    let params = MaternParams::new(resolved.prior.sigma, resolved.prior.ell, resolved.prior.nu)?;
    let basis = kl_decompose(&build_matern_covariance(&grid, &params)?, &grid)?;
    let path = resolved.out_dir.join("basis.csv");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    basis.write_csv(std::io::BufWriter::new(file))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn print_presets() {
    println!("{:<34} {:<62} settings", "preset", "scenario");
    for row in harness::preset_table() {
        println!("{:<34} {:<62} {}", row.names, row.scenario, row.settings);
    }
}

fn diagnose(args: DiagnoseArgs) -> Result<()> {
    let chain = io::read_chain(&args.chain)?;
    let n_points = chain.states[0].len();
    let n_rows = chain.states.len();
    let max_lag = args.max_lag.min(n_rows.saturating_sub(1));

    let mut out: Box<dyn std::io::Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "x,acf_lag{max_lag},ess_per_100,mean,variance")?;
    for k in 0..n_points {
        let series: Vec<f64> = chain.states.iter().map(|row| row[k]).collect();
        let mean = series.iter().sum::<f64>() / n_rows as f64;
        let var = if n_rows > 1 {
            series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_rows - 1) as f64
        } else {
            0.0
        };
        let (acf_val, ess100) = match ScalarSeries::new(series) {
            Ok(s) => (
                autocorrelation(&s, max_lag)
                    .map(|a| a[max_lag])
                    .unwrap_or(f64::NAN),
                effective_sample_size(&s)
                    .map(|e| e * 100.0 / n_rows as f64)
                    .unwrap_or(f64::NAN),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let x = args.domain_length * k as f64 / (n_points - 1).max(1) as f64;
        writeln!(
            out,
            "{x:.16e},{acf_val:.16e},{ess100:.16e},{mean:.16e},{var:.16e}"
        )?;
    }
    Ok(())
}
