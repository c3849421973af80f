//! Experiment harness: loads a JSON experiment, runs the oracle and the
//! learning algorithms per seed, and writes CSV/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;

pub use config::{load_config, Algorithm, ExperimentConfig};
pub use error::{Result, RunnerError};
pub use pipeline::{run_seed, SeedReport};

use output::{emit_oracle, emit_seed, write_json, write_manifest, FailureReport};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Simulation step, also used as the quadrature sub-step.
    pub substep: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(h) = self.substep {
            cfg.simulation.dt = Some(h);
            cfg.plan.quad_substep = Some(h);
        }
        cfg.validate()
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub truth: mfg_core::Solution64,
    pub reports: Vec<SeedReport>,
    pub failures: Vec<(u64, RunnerError)>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    /// Exit status of the first failed seed, 0 when every seed succeeded.
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map_or(0, |(_, e)| e.exit_code())
    }
}

fn record_stride(cfg: &ExperimentConfig) -> usize {
    (cfg.rollout.record_dt / cfg.simulation_dt())
        .round()
        .max(1.0) as usize
}

/// Oracle truth, then every seed in order; each seed writes into
/// `output_dir/seed-<s>` and failures into `failure.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let root = &cfg.output_dir;
    let stride = record_stride(cfg);
    let oracle = pipeline::oracle(cfg)?;
    let mut files = emit_oracle(
        &oracle.solution,
        &oracle.mean_field,
        &root.join("oracle"),
        stride,
    )?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    if cfg.algorithm != Algorithm::OracleOnly {
        for &seed in &cfg.seeds {
            let dir = root.join(format!("seed-{seed}"));
            match run_seed(cfg, &oracle.solution, seed) {
                Ok(report) => {
                    files.extend(emit_seed(&report, &dir, stride)?);
                    reports.push(report);
                }
                Err(e) => {
                    std::fs::create_dir_all(&dir)?;
                    let f = dir.join("failure.json");
                    write_json(
                        &f,
                        &FailureReport {
                            seed,
                            error: e.to_string(),
                            exit_code: e.exit_code(),
                        },
                    )?;
                    files.push(f);
                    failures.push((seed, e));
                }
            }
        }
    }
    write_manifest(root, &files)?;
    Ok(ExperimentOutcome {
        truth: oracle.solution,
        reports,
        failures,
        files,
    })
}

/// Oracle artifacts only.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<(mfg_core::Solution64, Vec<PathBuf>)> {
    let oracle = pipeline::oracle(cfg)?;
    let dir = cfg.output_dir.join("oracle");
    let files = emit_oracle(
        &oracle.solution,
        &oracle.mean_field,
        &dir,
        record_stride(cfg),
    )?;
    write_manifest(&cfg.output_dir, &files)?;
    Ok((oracle.solution, files))
}
