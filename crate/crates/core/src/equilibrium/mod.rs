//! Learning the feedback and feedforward gains of the equilibrium strategy.

pub mod config;
pub mod feedback;
pub mod feedforward;
pub mod identify;
pub mod solve;

pub use config::{CostWeights, SolverConfig};
pub use feedback::opi_feedback;
pub use feedforward::{
    certainty_equivalence_feedforward, mean_field_trajectory, opi_feedforward_special,
};
pub use identify::{identify_a, identify_a_plus_g, recover_b, IdentifiedModel};
pub use solve::{
    certify, consistency_check, oracle_solution, run_identification, run_model_free, AreResiduals,
    ConsistencyGap, EquilibriumRun, EquilibriumSolution, Method, StabilityCertificate,
};
