//! Seeded end-to-end runs: data collection, learning, rollout and the
//! error table against the model-based truth.

use std::time::Instant;

use mfg_core::datapipe::{build_regression_data, RegressionData};
use mfg_core::equilibrium::{
    consistency_check, oracle_solution, run_identification, run_model_free, ConsistencyGap,
    CostWeights, EquilibriumRun, SolverConfig,
};
use mfg_core::numkit::spectral_norm;
use mfg_core::population::{
    probe_plan, rollout_equilibrium, simulate_population, EnsembleTrajectories, Excitation,
    ExpectationPaths, Path, ProbeMode, SimulationConfig, TimeGrid,
};
use mfg_core::{Matrix64, Model64, Solution64};
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::Result;

/// Probe salts and simulation seed offsets of the experiments of one seed.
const ERROR_SALT: u64 = 1;
const AVERAGE_SALT: u64 = 2;
const AVERAGE_SEED_OFFSET: u64 = 1000;
const MEAN_FIELD_SEED_OFFSET: u64 = 2000;
const ROLLOUT_SEED_OFFSET: u64 = 3000;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub simulation: f64,
    pub regression: f64,
    pub solve: f64,
    pub rollout: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.simulation + self.regression + self.solve + self.rollout
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub label: String,
    /// `‖truth − estimate‖₂`.
    pub error: f64,
}

/// Paths plotted in `trajectories.csv`, on the rollout grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub mean_field: Path<f64>,
    pub population_average: Path<f64>,
    pub agents: Vec<Path<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub solution: Solution64,
    /// The identification path run alongside the model-free one.
    pub identification: Option<Solution64>,
    pub truth: Solution64,
    pub error_table: Vec<ErrorRow>,
    pub consistency: ConsistencyGap,
    #[serde(skip)]
    pub timings: Timings,
    #[serde(skip)]
    pub trajectories: Option<Trajectories>,
}

impl SeedReport {
    pub fn error(&self, label: &str) -> Option<f64> {
        self.error_table
            .iter()
            .find(|r| r.label == label)
            .map(|r| r.error)
    }
}

fn rollout_grid(cfg: &ExperimentConfig) -> Result<TimeGrid<f64>> {
    Ok(TimeGrid::covering(
        cfg.rollout.horizon,
        cfg.simulation_dt(),
    )?)
}

/// Model-based truth with the mean field on the rollout grid.
pub fn oracle(cfg: &ExperimentConfig) -> Result<EquilibriumRun<f64>> {
    Ok(oracle_solution(&cfg.model, &cfg.cfg, rollout_grid(cfg)?)?)
}

/// Expectation paths and data matrices of the two experiments.
#[derive(Debug, Clone)]
pub struct Collected {
    pub paths: ExpectationPaths<f64>,
    pub data: RegressionData<f64>,
}

/// Error experiment: independent probes, pair difference. Average
/// experiment: one shared probe, population average. Both use `−K₁⁰ x + ℓ`.
pub fn collect(cfg: &ExperimentConfig, seed: u64, timings: &mut Timings) -> Result<Collected> {
    let t = Instant::now();
    let (n_agents, m) = (cfg.n_agents, cfg.model.m());
    let independent = probe_plan::<f64>(
        &cfg.noise,
        ProbeMode::Independent,
        n_agents,
        m,
        seed,
        ERROR_SALT,
    )?;
    let shared = probe_plan::<f64>(
        &cfg.noise,
        ProbeMode::Shared,
        n_agents,
        m,
        seed,
        AVERAGE_SALT,
    )?;
    let [i, j] = cfg.simulation.pair;
    let mut sc = SimulationConfig::new(
        n_agents,
        cfg.plan.horizon(),
        cfg.simulation_dt(),
        seed,
        cfg.m_realizations,
    );
    sc.tracked = vec![i, j];
    let k0 = &cfg.cfg.k1_0;
    let error = simulate_population(
        &cfg.model,
        k0,
        Excitation {
            probes: &independent,
            feedforward: None,
        },
        &sc,
    )?;
    sc.seed = seed + AVERAGE_SEED_OFFSET;
    sc.tracked.clear();
    let average = simulate_population(
        &cfg.model,
        k0,
        Excitation {
            probes: &shared,
            feedforward: None,
        },
        &sc,
    )?;
    let paths = ExpectationPaths::from_ensembles(&error, (i, j), &average)?;
    timings.simulation += t.elapsed().as_secs_f64();
    let t = Instant::now();
    let data = build_regression_data(
        &paths,
        &cfg.plan,
        cfg.model.rho,
        cfg.algorithm == Algorithm::Alg2,
    )?;
    timings.regression += t.elapsed().as_secs_f64();
    Ok(Collected { paths, data })
}

fn rollout_config(cfg: &ExperimentConfig, n_agents: usize, seed: u64) -> SimulationConfig<f64> {
    let mut sc = SimulationConfig::new(
        n_agents,
        cfg.rollout.horizon,
        cfg.simulation_dt(),
        seed,
        cfg.rollout.realizations,
    );
    sc.tracked = (0..cfg.rollout.plotted_agents.min(n_agents)).collect();
    sc
}

/// Population average under `u = −K x`, the model-free estimate of `x̄*`.
pub fn population_average_under(
    cfg: &ExperimentConfig,
    k: &Matrix64,
    seed: u64,
) -> mfg_core::Result<Path<f64>> {
    let sc = rollout_config(cfg, cfg.rollout_agents(), seed);
    Ok(
        simulate_population(&cfg.model, k, Excitation::default(), &sc)?
            .mean
            .avg_state,
    )
}

/// Closed-loop rollout of `uᵢ = −K₁xᵢ − (K₂−K₁)x̄*` with `n_agents` agents
/// and its distance to `mean_field`.
pub fn consistency_rollout(
    cfg: &ExperimentConfig,
    model: &Model64,
    k1: &Matrix64,
    k2: &Matrix64,
    mean_field: &Path<f64>,
    n_agents: usize,
    seed: u64,
) -> Result<(EnsembleTrajectories<f64>, ConsistencyGap)> {
    let ens = rollout_equilibrium(
        model,
        k1,
        k2,
        mean_field,
        &rollout_config(cfg, n_agents, seed),
    )?;
    let gap = consistency_check(&ens.mean.avg_state, mean_field)?;
    Ok((ens, gap))
}

/// The learned solution and, for `alg2`, the identification path on the
/// same data.
pub fn learn(
    cfg: &ExperimentConfig,
    collected: &Collected,
    seed: u64,
) -> Result<(EquilibriumRun<f64>, Option<EquilibriumRun<f64>>)> {
    let costs = CostWeights::from_model(&cfg.model);
    let solver: &SolverConfig<f64> = &cfg.cfg;
    let grid = rollout_grid(cfg)?;
    let identification = || {
        run_identification(
            &collected.data,
            &costs,
            solver,
            collected.paths.xb.at(0),
            grid,
        )
    };
    Ok(match cfg.algorithm {
        Algorithm::Alg1 | Algorithm::OracleOnly => (identification()?, None),
        Algorithm::Alg2 => {
            let run = run_model_free(&collected.data, &costs, solver, |k2| {
                population_average_under(cfg, k2, seed + MEAN_FIELD_SEED_OFFSET)
            })?;
            (run, Some(identification()?))
        }
    })
}

/// Spectral-norm errors with the row labels of the two reference tables.
pub fn error_table(
    model: &Model64,
    truth: &Solution64,
    solution: &Solution64,
    identification: Option<&Solution64>,
) -> Vec<ErrorRow> {
    let err = |a: &Matrix64, b: &Matrix64| spectral_norm(&(a - b));
    let row = |label: &str, error: f64| ErrorRow {
        label: label.into(),
        error,
    };
    let mut rows = vec![
        row("P11", err(&truth.p11, &solution.p11)),
        row("K1", err(&truth.k1, &solution.k1)),
    ];
    match identification {
        None => {
            rows.push(row("P12", err(&truth.p12, &solution.p12)));
            rows.push(row("K2", err(&truth.k2, &solution.k2)));
            if let Some(id) = &solution.identified {
                rows.push(row("A", err(&model.a, &id.a)));
                rows.push(row("B", err(&model.b, &id.b)));
                rows.push(row("A+G", err(&model.a_plus_g(), &id.a_plus_g)));
                rows.push(row("G", err(&model.g, &id.g())));
            }
        }
        Some(id) => {
            rows.push(row("P12^5", err(&truth.p12, &solution.p12)));
            rows.push(row("K2^5", err(&truth.k2, &solution.k2)));
            rows.push(row("P12_hat", err(&truth.p12, &id.p12)));
            rows.push(row("K2_hat", err(&truth.k2, &id.k2)));
        }
    }
    rows
}

/// One seed of a learning experiment against `truth`.
pub fn run_seed(cfg: &ExperimentConfig, truth: &Solution64, seed: u64) -> Result<SeedReport> {
    let mut timings = Timings::default();
    let collected = collect(cfg, seed, &mut timings)?;
    let t = Instant::now();
    let (run, identification) = learn(cfg, &collected, seed)?;
    timings.solve = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let s = &run.solution;
    let (ens, consistency) = consistency_rollout(
        cfg,
        &cfg.model,
        &s.k1,
        &s.k2,
        &run.mean_field,
        cfg.rollout_agents(),
        seed + ROLLOUT_SEED_OFFSET,
    )?;
    timings.rollout = t.elapsed().as_secs_f64();
    let identification = identification.map(|r| r.solution);
    Ok(SeedReport {
        seed,
        algorithm: cfg.algorithm,
        error_table: error_table(&cfg.model, truth, s, identification.as_ref()),
        trajectories: Some(Trajectories {
            mean_field: run.mean_field.clone(),
            population_average: ens.mean.avg_state.clone(),
            agents: ens.mean.agent_states.clone(),
        }),
        solution: run.solution,
        identification,
        truth: truth.clone(),
        consistency,
        timings,
    })
}
