//! Stochastic simulation of the coupled agent population.

pub mod expectation;
pub mod noise;
pub mod path;
pub mod rollout;
pub mod simulate;

pub use expectation::{
    closed_loop_rk4, exact_expectation_paths, expectation_paths, population_average_state,
    ExpectationMode, ExpectationPaths,
};
pub use noise::{exploration_noise, probe_plan, AgentProbe, NoiseSampler, NoiseSpec, ProbeMode};
pub use path::{steps_for, Path, TimeGrid};
pub use rollout::rollout_equilibrium;
pub use simulate::{
    simulate_population, EnsembleTrajectories, Excitation, RealizationRecord, Recording,
    SimulationConfig,
};
