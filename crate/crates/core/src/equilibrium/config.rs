//! Solver settings and cost weights shared by the learning algorithms.

use serde::{Deserialize, Serialize};

use crate::model::LqgGameModel;
use crate::numkit::{Matrix, StopRule, DEFAULT_RANK_TOL};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SolverConfig<T> {
    /// Stop once `‖Pᵏ − Pᵏ⁻¹‖_F ≤ xi`.
    #[serde(default = "default_xi")]
    pub xi: T,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Initial feedback gain; must make `A − BK ρ/2`-Hurwitz.
    pub k1_0: Matrix<T>,
    /// Initial feedforward gain for the model-free recursion. Defaults to
    /// the learned feedback gain.
    #[serde(default)]
    pub k2_0: Option<Matrix<T>>,
    /// Relative singular-value threshold of every least-squares solve.
    #[serde(default = "default_rank_tol")]
    pub rank_tol: T,
}

fn default_xi<T: Real>() -> T {
    T::lit(1e-6)
}

fn default_max_iter() -> usize {
    50
}

fn default_rank_tol<T: Real>() -> T {
    T::tol(DEFAULT_RANK_TOL)
}

impl<T: Real> SolverConfig<T> {
    pub fn new(k1_0: Matrix<T>) -> Self {
        Self {
            xi: default_xi(),
            max_iter: default_max_iter(),
            k1_0,
            k2_0: None,
            rank_tol: default_rank_tol(),
        }
    }

    pub fn rule(&self) -> StopRule<T> {
        StopRule {
            xi: self.xi,
            max_iter: self.max_iter,
        }
    }
}

/// The parts of the game a model-free learner is allowed to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct CostWeights<T> {
    #[serde(rename = "Q")]
    pub q: Matrix<T>,
    #[serde(rename = "R")]
    pub r: Matrix<T>,
    #[serde(rename = "Gamma")]
    pub gamma: Matrix<T>,
    pub rho: T,
}

impl<T: Real> CostWeights<T> {
    pub fn from_model(model: &LqgGameModel<T>) -> Self {
        Self {
            q: model.q.clone(),
            r: model.r.clone(),
            gamma: model.gamma.clone(),
            rho: model.rho,
        }
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn m(&self) -> usize {
        self.r.rows()
    }
}
