//! Run directories: CSV histories, final fields, metadata and checkpoints.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing a
//! written value gives back the same bits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use uzawa_core::net::write_checkpoint;
use uzawa_core::oracle::{FdHistory, Grid1D};
use uzawa_core::RunRecord;

use crate::error::{CliError, Result};

pub const ERROR_HEADER: [&str; 3] = ["update", "state_l2_error", "control_l2_error"];
pub const LOSS_HEADER: [&str; 5] = ["update", "misfit", "multiplier_term", "control_norm_term", "regulariser_term"];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Shortest round-trip decimal form, in exponent notation for very small or
/// very large magnitudes.
pub fn format_value(v: f64) -> String {
    let magnitude = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&magnitude) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes a header line followed by one comma-separated line per row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    let write = || -> std::io::Result<()> {
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        out.flush()
    };
    write().map_err(io_error(path))
}

/// Reads a file written by [`write_csv`]: the header and the numeric rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(io_error(path))?;
    let malformed = |reason: String| CliError::Csv {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = BufReader::new(file).lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line.map_err(io_error(path))?.split(',').map(str::to_string).collect(),
        None => return Err(malformed("missing header".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_error(path))?;
        let row = line
            .split(',')
            .map(|cell| cell.parse::<f64>().map_err(|e| malformed(format!("line {}: `{cell}`: {e}", i + 2))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(malformed(format!(
                "line {} has {} cells, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let text: String = entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    fs::write(path, text).map_err(io_error(path))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir))
}

fn field_rows(values: &[f64]) -> impl Iterator<Item = Vec<f64>> + '_ {
    values.iter().map(|&v| vec![v])
}

fn error_rows<'a>(states: &'a [f64], controls: &'a [f64], first: usize) -> impl Iterator<Item = Vec<f64>> + 'a {
    states
        .iter()
        .zip(controls)
        .enumerate()
        .map(move |(k, (&s, &c))| vec![(k + first) as f64, s, c])
}

/// Writes `Error.csv`, `Loss.csv`, `State.csv`, `Control.csv`, `meta.txt` and
/// `checkpoint.bin` for a Deep Uzawa run. `meta` lists the configuration; the
/// run summary is appended to it.
pub fn emit_csv(record: &RunRecord, dir: &Path, meta: &[(String, String)]) -> Result<()> {
    create_dir(dir)?;
    write_csv(
        &dir.join("Error.csv"),
        &ERROR_HEADER,
        error_rows(&record.state_error, &record.control_error, 1),
    )?;
    if !record.refined_state_error.is_empty() {
        write_csv(
            &dir.join("ErrorRefined.csv"),
            &ERROR_HEADER,
            error_rows(&record.refined_state_error, &record.refined_control_error, 1),
        )?;
    }
    write_csv(
        &dir.join("Loss.csv"),
        &LOSS_HEADER,
        record.losses.iter().enumerate().map(|(k, l)| {
            vec![
                (k + 1) as f64,
                l.misfit,
                l.multiplier_term,
                l.control_norm_term,
                l.regulariser_term,
            ]
        }),
    )?;
    write_csv(&dir.join("State.csv"), &["state"], field_rows(&record.state))?;
    write_csv(&dir.join("Control.csv"), &["control"], field_rows(&record.control))?;

    let mut entries = meta.to_vec();
    let mut add = |k: &str, v: String| entries.push((k.to_string(), v));
    add("updates", record.updates().to_string());
    add(
        "diverged_at",
        record.diverged_at.map_or("none".to_string(), |k| k.to_string()),
    );
    add("parameter_count", record.params.len().to_string());
    add("wall_clock_seconds", record.wall_clock.iter().sum::<f64>().to_string());
    if let Some((u, f)) = record.exact_norms {
        add("exact_state_l2_norm", u.to_string());
        add("exact_control_l2_norm", f.to_string());
    }
    write_meta(&dir.join("meta.txt"), &entries)?;

    let path = dir.join("checkpoint.bin");
    let file = File::create(&path).map_err(io_error(&path))?;
    write_checkpoint(&record.params, BufWriter::new(file))?;
    Ok(())
}

/// Sign of the constraint residual relative to `Δu + f` in an oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualSign {
    /// `K = Δu + f`.
    Plus,
    /// `K = −Δu − f`.
    Minus,
}

fn laplacian(grid: &Grid1D, u: &[f64]) -> Vec<f64> {
    let h2 = grid.spacing() * grid.spacing();
    let mut out = vec![0.0; u.len()];
    for i in 1..u.len() - 1 {
        out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) / h2;
    }
    out
}

fn weighted_dot(grid: &Grid1D, a: &[f64], b: &[f64]) -> f64 {
    let last = a.len() - 1;
    let sum: f64 = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| if i == 0 || i == last { 0.5 * x * y } else { x * y })
        .sum();
    grid.spacing() * sum
}

/// Writes the same files as [`emit_csv`] for a finite-difference iteration,
/// plus `Multiplier.csv`. Errors are measured against the discrete saddle
/// point and indexed from update 0, the initial guess.
pub fn emit_fd_history(
    history: &FdHistory,
    grid: &Grid1D,
    alpha: f64,
    target: &[f64],
    sign: ResidualSign,
    dir: &Path,
    meta: &[(String, String)],
) -> Result<()> {
    create_dir(dir)?;
    let updates = history.state_error.len();
    write_csv(
        &dir.join("Error.csv"),
        &ERROR_HEADER,
        error_rows(&history.state_error, &history.control_error, 0),
    )?;
    write_csv(
        &dir.join("Multiplier.csv"),
        &["update", "multiplier_l2_error", "min_multiplier"],
        (0..updates).map(|k| vec![k as f64, history.multiplier_error[k], history.min_multiplier[k]]),
    )?;
    let losses: Vec<Vec<f64>> = history
        .iterates
        .iter()
        .enumerate()
        .map(|(k, fields)| {
            let lap = laplacian(grid, &fields.u);
            let misfit: Vec<f64> = fields.u.iter().zip(target).map(|(u, d)| u - d).collect();
            let residual: Vec<f64> = lap
                .iter()
                .zip(&fields.f)
                .map(|(l, f)| match sign {
                    ResidualSign::Plus => l + f,
                    ResidualSign::Minus => -l - f,
                })
                .collect();
            vec![
                k as f64,
                0.5 * weighted_dot(grid, &misfit, &misfit),
                weighted_dot(grid, &fields.z, &residual),
                0.25 * alpha * weighted_dot(grid, &fields.f, &fields.f),
                0.25 * alpha * weighted_dot(grid, &lap, &lap),
            ]
        })
        .collect();
    write_csv(&dir.join("Loss.csv"), &LOSS_HEADER, losses)?;
    write_csv(&dir.join("State.csv"), &["state"], field_rows(&history.last.u))?;
    write_csv(&dir.join("Control.csv"), &["control"], field_rows(&history.last.f))?;
    let mut entries = meta.to_vec();
    entries.push(("updates".into(), (updates - 1).to_string()));
    entries.push((
        "diverged_at".into(),
        history.diverged_at.map_or("none".to_string(), |k| k.to_string()),
    ));
    write_meta(&dir.join("meta.txt"), &entries)
}

/// `dir/name`, for subdirectories of a run directory.
pub fn subdir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
