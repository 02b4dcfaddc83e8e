//! Artifact writers. JSON is pretty-printed with a trailing LF; CSV uses
//! LF terminators and the shortest round-trip float formatting.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use bilevel_landweber::upper::{SweepEntry, UpperReport};

pub const HISTORY_HEADER: [&str; 6] = ["j", "residual", "error", "k_j", "lower_residual", "k_cap"];
pub const SWEEP_HEADER: [&str; 6] = [
    "delta",
    "seed",
    "j_star",
    "final_error",
    "final_residual",
    "total_lower_steps",
];

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per outer index `j`; `error` is empty when the truth is unknown.
pub fn write_histories(path: &Path, rep: &UpperReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(HISTORY_HEADER)?;
    for j in 0..rep.residual_history.len() {
        let error = rep.error_history.as_ref().and_then(|e| e.get(j).copied());
        w.write_record([
            j.to_string(),
            rep.residual_history[j].to_string(),
            opt(error),
            rep.lower_steps.get(j).map(|k| k.to_string()).unwrap_or_default(),
            opt(rep.lower_residuals.get(j).copied()),
            rep.lower_caps.get(j).map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

pub fn write_sweep(path: &Path, rows: &[SweepEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.delta.to_string(),
            r.seed.to_string(),
            r.j_star.to_string(),
            r.final_error.to_string(),
            r.final_residual.to_string(),
            r.total_lower_steps.to_string(),
        ])?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}
