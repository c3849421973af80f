//! Declarative experiment description, loaded from JSON.

use std::path::{Path, PathBuf};

use mfg_core::datapipe::SamplingPlan;
use mfg_core::equilibrium::SolverConfig;
use mfg_core::population::{steps_for, NoiseSampler};
use mfg_core::{Error as CoreError, Model64};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunnerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Learned feedback, identification and certainty-equivalent feedforward.
    Alg1,
    /// Learned feedback and model-free feedforward; also reports the
    /// identification path for comparison.
    Alg2,
    OracleOnly,
}

/// Simulation of the two data-collection experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSettings {
    /// Euler–Maruyama step; defaults to `min(plan.ts, 1e-3)`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Agents whose difference forms `x̃`.
    #[serde(default = "default_pair")]
    pub pair: [usize; 2],
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            dt: None,
            pair: default_pair(),
        }
    }
}

fn default_pair() -> [usize; 2] {
    [0, 1]
}

/// Closed-loop runs after learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSettings {
    #[serde(default = "default_rollout_horizon")]
    pub horizon: f64,
    /// Defaults to the experiment's `n_agents`.
    #[serde(default)]
    pub n_agents: Option<usize>,
    #[serde(default = "default_one")]
    pub realizations: usize,
    /// Row spacing of `trajectories.csv`.
    #[serde(default = "default_record_dt")]
    pub record_dt: f64,
    /// Agents whose states appear in `trajectories.csv`.
    #[serde(default = "default_plotted")]
    pub plotted_agents: usize,
}

impl Default for RolloutSettings {
    fn default() -> Self {
        Self {
            horizon: default_rollout_horizon(),
            n_agents: None,
            realizations: 1,
            record_dt: default_record_dt(),
            plotted_agents: default_plotted(),
        }
    }
}

fn default_rollout_horizon() -> f64 {
    5.0
}

fn default_one() -> usize {
    1
}

fn default_record_dt() -> f64 {
    0.01
}

fn default_plotted() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub model: Model64,
    pub plan: SamplingPlan<f64>,
    /// Distribution of the exploration sinusoids.
    pub noise: NoiseSampler,
    pub cfg: SolverConfig<f64>,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub n_agents: usize,
    pub m_realizations: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub rollout: RolloutSettings,
}

impl ExperimentConfig {
    /// Parses and validates; relative `output_dir` stays relative to the
    /// working directory.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            if let Some(field) = missing_field(&message) {
                path = if path == "." {
                    field.to_string()
                } else {
                    format!("{path}.{field}")
                };
            }
            RunnerError::Parse { path, message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn simulation_dt(&self) -> f64 {
        self.simulation.dt.unwrap_or(self.plan.ts.min(1e-3))
    }

    pub fn rollout_agents(&self) -> usize {
        self.rollout.n_agents.unwrap_or(self.n_agents)
    }

    /// Checks everything the pipeline relies on; errors name the field.
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| match e {
            CoreError::InvalidArgument(msg) => match msg.split_once(": ") {
                Some((field, why)) => RunnerError::invalid(format!("model.{field}"), why),
                None => RunnerError::invalid("model", msg),
            },
            other => RunnerError::invalid("model", other),
        })?;
        let (n, m) = (self.model.n(), self.model.m());
        self.plan
            .validate()
            .map_err(|e| RunnerError::invalid("plan", e))?;
        self.noise
            .validate()
            .map_err(|e| RunnerError::invalid("noise", e))?;
        let c = &self.cfg;
        if c.k1_0.shape() != (m, n) {
            return Err(RunnerError::invalid(
                "cfg.k1_0",
                format!("must be {m}x{n}, got {:?}", c.k1_0.shape()),
            ));
        }
        if let Some(k2) = &c.k2_0 {
            if k2.shape() != (m, n) {
                return Err(RunnerError::invalid(
                    "cfg.k2_0",
                    format!("must be {m}x{n}, got {:?}", k2.shape()),
                ));
            }
        }
        if !(c.xi > 0.0) || c.max_iter == 0 {
            return Err(RunnerError::invalid(
                "cfg.xi",
                "xi must be positive and max_iter at least 1",
            ));
        }
        if !(c.rank_tol > 0.0 && c.rank_tol < 1.0) {
            return Err(RunnerError::invalid("cfg.rank_tol", "must lie in (0, 1)"));
        }
        if self.seeds.is_empty() {
            return Err(RunnerError::invalid(
                "seeds",
                "at least one seed is required",
            ));
        }
        let [i, j] = self.simulation.pair;
        if i == j || i.max(j) >= self.n_agents {
            return Err(RunnerError::invalid(
                "simulation.pair",
                format!(
                    "needs two distinct agents below n_agents = {}",
                    self.n_agents
                ),
            ));
        }
        if self.m_realizations == 0 {
            return Err(RunnerError::invalid("m_realizations", "must be at least 1"));
        }
        let h = self.simulation_dt();
        if !(h > 0.0) || !is_multiple(self.plan.ts, h) || !is_multiple(self.plan.t1, h) {
            return Err(RunnerError::invalid(
                "simulation.dt",
                format!("plan.ts and plan.t1 must be multiples of the step {h}"),
            ));
        }
        if let Some(q) = self.plan.quad_substep {
            if !is_multiple(q, h) {
                return Err(RunnerError::invalid(
                    "plan.quad_substep",
                    format!("must be a multiple of the simulation step {h}"),
                ));
            }
        }
        let r = &self.rollout;
        if steps_for(r.horizon, h).is_err() || !is_multiple(r.record_dt, h) {
            return Err(RunnerError::invalid(
                "rollout",
                format!("horizon and record_dt must be positive multiples of {h}"),
            ));
        }
        if r.realizations == 0
            || self.rollout_agents() == 0
            || r.plotted_agents > self.rollout_agents()
        {
            return Err(RunnerError::invalid(
                "rollout",
                "needs realizations >= 1 and plotted_agents <= n_agents",
            ));
        }
        Ok(())
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

fn is_multiple(x: f64, h: f64) -> bool {
    let k = (x / h).round();
    k >= 0.0 && (x - k * h).abs() <= 1e-9 * h.max(x.abs())
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ExperimentConfig::from_json(&text)
}
