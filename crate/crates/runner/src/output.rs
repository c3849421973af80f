//! CSV and JSON artifacts of a run, plus the file manifest.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use mfg_core::numkit::IterationHistory;
use mfg_core::population::Path;
use mfg_core::{Matrix64, Solution64};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pipeline::{ErrorRow, SeedReport, Trajectories};

pub const CONVERGENCE_HEADER: [&str; 4] = ["block", "iteration", "p_error", "k_error"];
pub const ERRORS_HEADER: [&str; 2] = ["quantity", "error"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn num(v: f64) -> String {
    // shortest round-trip representation
    format!("{v:?}")
}

/// `block,iteration,p_error,k_error` with Frobenius distances to the truth.
pub fn write_convergence(
    path: &FsPath,
    blocks: &[(&str, &IterationHistory<f64>, &Matrix64, &Matrix64)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for (name, history, p_star, k_star) in blocks {
        for (k, it) in history.iterates.iter().enumerate() {
            let pe = (&it.p - *p_star).frobenius_norm();
            let ke = (&it.k - *k_star).frobenius_norm();
            w.write_record([name.to_string(), (k + 1).to_string(), num(pe), num(ke)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trajectories_header(n: usize, agents: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|c| format!("xbar_star_{c}")));
    h.extend((1..=n).map(|c| format!("x_N_{c}")));
    for a in 1..=agents {
        h.extend((1..=n).map(|c| format!("agent{a}_x{c}")));
    }
    h
}

/// One row every `stride` grid steps.
pub fn write_trajectories(path: &FsPath, tr: &Trajectories, stride: usize) -> Result<()> {
    let n = tr.mean_field.dim;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trajectories_header(n, tr.agents.len()))?;
    let at = |p: &Path<f64>, k: usize| p.at(k).iter().map(|&v| num(v)).collect::<Vec<_>>();
    for k in (0..tr.mean_field.len()).step_by(stride.max(1)) {
        let mut rec = vec![num(tr.mean_field.grid.time(k))];
        rec.extend(at(&tr.mean_field, k));
        rec.extend(at(&tr.population_average, k));
        for a in &tr.agents {
            rec.extend(at(a, k));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_errors(path: &FsPath, rows: &[ErrorRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ERRORS_HEADER)?;
    for r in rows {
        w.write_record([r.label.clone(), num(r.error)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize>(path: &FsPath, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn manifest_entry(root: &FsPath, file: &FsPath) -> Result<ManifestEntry> {
    let rel = file.strip_prefix(root).unwrap_or(file);
    Ok(ManifestEntry {
        path: rel.to_string_lossy().replace('\\', "/"),
        bytes: fs::metadata(file)?.len(),
    })
}

/// Writes `manifest.json` in `root` listing `files`.
pub fn write_manifest(root: &FsPath, files: &[PathBuf]) -> Result<Manifest> {
    let manifest = Manifest {
        files: files
            .iter()
            .map(|f| manifest_entry(root, f))
            .collect::<Result<_>>()?,
    };
    write_json(&root.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn feedback_blocks<'a>(
    s: &'a Solution64,
    truth: &'a Solution64,
) -> Vec<(
    &'static str,
    &'a IterationHistory<f64>,
    &'a Matrix64,
    &'a Matrix64,
)> {
    let mut blocks = vec![("feedback", &s.feedback_history, &truth.p11, &truth.k1)];
    if let Some(ff) = &s.feedforward_history {
        blocks.push(("feedforward", ff, &truth.p12, &truth.k2));
    }
    blocks
}

/// Emits every artifact of one seed into `dir` and returns the file list.
pub fn emit_seed(report: &SeedReport, dir: &FsPath, record_stride: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let conv = dir.join("convergence.csv");
    write_convergence(&conv, &feedback_blocks(&report.solution, &report.truth))?;
    let errors = dir.join("errors.csv");
    write_errors(&errors, &report.error_table)?;
    let solution = dir.join("solution.json");
    write_json(&solution, report)?;
    let mut files = vec![conv, errors, solution];
    if let Some(tr) = &report.trajectories {
        let traj = dir.join("trajectories.csv");
        write_trajectories(&traj, tr, record_stride)?;
        files.push(traj);
    }
    Ok(files)
}

/// Model-based truth: solution, Kleinman convergence to its own limit and the mean field.
pub fn emit_oracle(
    truth: &Solution64,
    mean_field: &Path<f64>,
    dir: &FsPath,
    record_stride: usize,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let conv = dir.join("convergence.csv");
    write_convergence(&conv, &feedback_blocks(truth, truth))?;
    let solution = dir.join("solution.json");
    write_json(&solution, truth)?;
    let mf = dir.join("mean_field.csv");
    let mut w = csv::Writer::from_path(&mf)?;
    let mut head = vec!["t".to_string()];
    head.extend((1..=mean_field.dim).map(|c| format!("xbar_star_{c}")));
    w.write_record(&head)?;
    for k in (0..mean_field.len()).step_by(record_stride.max(1)) {
        let mut rec = vec![num(mean_field.grid.time(k))];
        rec.extend(mean_field.at(k).iter().map(|&v| num(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(vec![conv, solution, mf])
}

/// Failure report of a seed whose run stopped with an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub seed: u64,
    pub error: String,
    pub exit_code: i32,
}
