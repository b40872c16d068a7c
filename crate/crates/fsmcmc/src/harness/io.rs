//! CSV artifact readers and writers.
//!
//! All reals are written with 17 significant digits so files round-trip
//! exactly and identical runs produce byte-identical artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::grid::Field;
use crate::models::ObservationSet;

/// `time,value` rows of an observation set.
pub fn write_observations(path: &Path, data: &ObservationSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "time,value")?;
    for (t, v) in data.times().iter().zip(data.values()) {
        writeln!(out, "{t:.16e},{v:.16e}")?;
    }
    Ok(())
}

/// Reads observations written by [`write_observations`]. The noise level is
/// not stored in the file; it comes from the experiment config.
pub fn read_observations(path: &Path, noise_sd: f64) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read observations from {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 2 {
            bail!("expected `time,value` rows in {}", path.display());
        }
        times.push(record[0].parse::<f64>()?);
        values.push(record[1].parse::<f64>()?);
    }
    Ok(ObservationSet::new(times, values, noise_sd)?)
}

/// `x,value` rows of a field over its grid.
pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "x,value")?;
    for (x, v) in field.grid().points().iter().zip(field.values()) {
        writeln!(out, "{x:.16e},{v:.16e}")?;
    }
    Ok(())
}

/// Per-grid-point diagnostics of one chain.
#[derive(Debug, Clone)]
pub struct DiagnosticsTable {
    /// Rows `(x, acf_lag, ess_per_100, mean, variance)`.
    pub rows: Vec<[f64; 5]>,
    /// The lag used for the ACF column.
    pub acf_lag: usize,
}

pub fn write_diagnostics(path: &Path, table: &DiagnosticsTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "x,acf_lag{},ess_per_100,mean,variance",
        table.acf_lag
    )?;
    for row in &table.rows {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, ",")?;
            }
            write!(out, "{v:.16e}")?;
            first = false;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-lag ACF table at a few selected grid points.
pub fn write_acf_table(path: &Path, points: &[f64], columns: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "lag")?;
    for p in points {
        write!(out, ",acf_x{p}")?;
    }
    writeln!(out)?;
    let n_lags = columns.first().map_or(0, |c| c.len());
    for lag in 0..n_lags {
        write!(out, "{lag}")?;
        for col in columns {
            write!(out, ",{:.16e}", col[lag])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// A chain read back from its CSV artifact.
#[derive(Debug, Clone)]
pub struct ChainCsv {
    pub iterations: Vec<usize>,
    pub phis: Vec<f64>,
    /// `states[row][grid_index]`.
    pub states: Vec<Vec<f64>>,
}

/// Reads a chain written by `Chain::write_csv`.
pub fn read_chain(path: &Path) -> Result<ChainCsv> {
    let file = File::open(path)
        .with_context(|| format!("cannot open chain file {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let n_cols = reader.headers()?.len();
    if n_cols < 3 {
        bail!(
            "{} does not look like a chain file (needs iteration,phi,u_0,...)",
            path.display()
        );
    }
    let mut out = ChainCsv {
        iterations: Vec::new(),
        phis: Vec::new(),
        states: Vec::new(),
    };
    for record in reader.records() {
        let record = record?;
        if record.len() != n_cols {
            bail!("ragged row in {}", path.display());
        }
        out.iterations.push(record[0].parse()?);
        out.phis.push(record[1].parse()?);
        let mut row = Vec::with_capacity(n_cols - 2);
        for i in 2..n_cols {
            row.push(record[i].parse::<f64>()?);
        }
        out.states.push(row);
    }
    if out.states.is_empty() {
        bail!("{} contains no states", path.display());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::samplers::Chain;
    use std::sync::Arc;

    #[test]
    fn observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = ObservationSet::new(vec![0.1, 0.2, 0.5], vec![1.5, -0.25, 3.0], 0.1).unwrap();
        write_observations(&path, &data).unwrap();
        let back = read_observations(&path, 0.1).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn chain_csv_round_trips_through_reader() {
        let grid = Arc::new(Grid::uniform(4, 1.0).unwrap());
        let states: Vec<Field> = (0..6)
            .map(|i| {
                Field::new(
                    (0..4).map(|k| (i * 4 + k) as f64 / 7.0).collect(),
                    grid.clone(),
                )
                .unwrap()
            })
            .collect();
        let chain = Chain {
            log_potentials: (0..6).map(|i| i as f64 * 0.5).collect(),
            states,
            accept_count: 3,
            proposal_count: 6,
            prerun_accept_count: 0,
            prerun_proposal_count: 0,
            auto_reject_count: 0,
            sigma_snapshots: Vec::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.csv");
        let mut buf = Vec::new();
        chain.write_csv(&mut buf, 1).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let back = read_chain(&path).unwrap();
        assert_eq!(back.states.len(), 6);
        assert_eq!(back.iterations, vec![0, 1, 2, 3, 4, 5]);
        for (row, state) in back.states.iter().zip(&chain.states) {
            assert_eq!(row.as_slice(), state.values());
        }
        // Thinned writes keep every other row.
        let mut buf = Vec::new();
        chain.write_csv(&mut buf, 2).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let thinned = read_chain(&path).unwrap();
        assert_eq!(thinned.iterations, vec![0, 2, 4]);
    }

    #[test]
    fn reader_rejects_non_chain_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_chain(&path).is_err());
    }
}
