//! End-to-end solvers: the model-based oracle and the two learning
//! algorithms, plus the rollout consistency check.

use serde::{Deserialize, Serialize};

use crate::datapipe::{RankReport, RegressionData};
use crate::error::{Error, Result};
use crate::model::LqgGameModel;
use crate::numkit::{
    are_residual, hamiltonian, kleinman_history, spectral, stable_graph_solution, HamiltonianKind,
    IterationHistory, Matrix,
};
use crate::population::{Path, TimeGrid};
use crate::scalar::Real;

use super::config::{CostWeights, SolverConfig};
use super::feedback::opi_feedback;
use super::feedforward::{
    certainty_equivalence_feedforward, mean_field_trajectory, opi_feedforward_special,
};
use super::identify::{identify_a, identify_a_plus_g, recover_b, IdentifiedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Model-based Kleinman iteration and Hamiltonian subspace.
    Oracle,
    /// Learned feedback, identification, certainty-equivalent feedforward.
    Identification,
    /// Learned feedback and model-free feedforward recursion.
    ModelFree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Closed-loop matrix, e.g. `"A - BK1"`.
    pub name: String,
    pub shift: f64,
    /// Largest real part of the spectrum.
    pub margin: f64,
    pub hurwitz: bool,
}

/// Frobenius residuals of the two Riccati equations on the model used to
/// check them (the true one for the oracle, the identified one otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreResiduals {
    pub feedback: f64,
    pub feedforward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct EquilibriumSolution<T> {
    pub method: Method,
    pub p11: Matrix<T>,
    pub k1: Matrix<T>,
    pub p12: Matrix<T>,
    pub k2: Matrix<T>,
    pub identified: Option<IdentifiedModel<T>>,
    pub feedback_history: IterationHistory<T>,
    pub feedforward_history: Option<IterationHistory<T>>,
    pub ranks: Vec<RankReport>,
    pub certificates: Vec<StabilityCertificate>,
    pub residuals: Option<AreResiduals>,
}

/// A solution together with its mean-field trajectory `x̄*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumRun<T> {
    pub solution: EquilibriumSolution<T>,
    pub mean_field: Path<T>,
}

/// Spectra of `A − BK₁` and `A + G − BK₂` against `ρ/2`.
pub fn certify<T: Real>(
    a: &Matrix<T>,
    a_plus_g: &Matrix<T>,
    b: &Matrix<T>,
    k1: &Matrix<T>,
    k2: &Matrix<T>,
    rho: T,
) -> Result<Vec<StabilityCertificate>> {
    let half = rho * T::lit(0.5);
    [("A - BK1", a, k1), ("A + G - BK2", a_plus_g, k2)]
        .into_iter()
        .map(|(name, f, k)| {
            let rep = spectral(&(f - &(b * k)), half)?;
            Ok(StabilityCertificate {
                name: name.into(),
                shift: half.as_f64(),
                margin: rep.stability_margin.as_f64(),
                hurwitz: rep.hurwitz,
            })
        })
        .collect()
}

fn residuals<T: Real>(
    a: &Matrix<T>,
    g: &Matrix<T>,
    b: &Matrix<T>,
    costs: &CostWeights<T>,
    p11: &Matrix<T>,
    p12: &Matrix<T>,
) -> Result<AreResiduals> {
    let (q, r, gm, rho) = (&costs.q, &costs.r, &costs.gamma, costs.rho);
    Ok(AreResiduals {
        feedback: are_residual(a, g, b, q, r, gm, rho, p11, HamiltonianKind::H1)?.as_f64(),
        feedforward: are_residual(a, g, b, q, r, gm, rho, p12, HamiltonianKind::H2)?.as_f64(),
    })
}

/// Ground truth from the model: Kleinman iteration from `cfg.k1_0` for
/// `P₁₁` and the `H2` stable graph subspace for `P₁₂`.
pub fn oracle_solution<T: Real>(
    model: &LqgGameModel<T>,
    cfg: &SolverConfig<T>,
    grid: TimeGrid<T>,
) -> Result<EquilibriumRun<T>> {
    model.validate()?;
    let history = kleinman_history(
        &model.a,
        &model.b,
        &model.q,
        &model.r,
        model.rho,
        &cfg.k1_0,
        cfg.xi,
        cfg.max_iter,
    )
    .and_then(IterationHistory::into_result)
    .map_err(|e| e.in_stage("feedback"))?;
    let (p11, k1) = (history.last().p.clone(), history.last().k.clone());
    let p12 = hamiltonian(model, HamiltonianKind::H2)
        .and_then(|h| stable_graph_solution(&h))
        .map_err(|e| e.in_stage("feedforward"))?;
    let k2 = model.r.solve(&(&model.b.transpose() * &p12))?;
    let ag = model.a_plus_g();
    let costs = CostWeights::from_model(model);
    let mean_field = mean_field_trajectory(&ag, &model.b, &k2, &model.init_mean, grid)?;
    let solution = EquilibriumSolution {
        method: Method::Oracle,
        certificates: certify(&model.a, &ag, &model.b, &k1, &k2, model.rho)?,
        residuals: Some(residuals(&model.a, &model.g, &model.b, &costs, &p11, &p12)?),
        p11,
        k1,
        p12,
        k2,
        identified: None,
        feedback_history: history,
        feedforward_history: None,
        ranks: Vec::new(),
    };
    Ok(EquilibriumRun {
        solution,
        mean_field,
    })
}

/// Learned feedback, identification of `B`, `A` and `A + G`, and the
/// certainty-equivalent feedforward. The mean field starts at `xbar0` and
/// is sampled on `grid`.
pub fn run_identification<T: Real>(
    data: &RegressionData<T>,
    costs: &CostWeights<T>,
    cfg: &SolverConfig<T>,
    xbar0: &[T],
    grid: TimeGrid<T>,
) -> Result<EquilibriumRun<T>> {
    let history = opi_feedback(data, costs, cfg)
        .and_then(IterationHistory::into_result)
        .map_err(|e| e.in_stage("feedback"))?;
    let (p11, k1) = (history.last().p.clone(), history.last().k.clone());
    let b = recover_b(&p11, &k1, &costs.r)?;
    let a = identify_a(data, &b, cfg.rank_tol).map_err(|e| e.in_stage("identify A"))?;
    let ag = identify_a_plus_g(data, &b, cfg.rank_tol).map_err(|e| e.in_stage("identify A + G"))?;
    let (p12, k2) = certainty_equivalence_feedforward(&a, &ag, &b, costs)
        .map_err(|e| e.in_stage("feedforward"))?;
    let mean_field = mean_field_trajectory(&ag, &b, &k2, xbar0, grid)?;
    let model = IdentifiedModel { a, b, a_plus_g: ag };
    let solution = EquilibriumSolution {
        method: Method::Identification,
        certificates: certify(&model.a, &model.a_plus_g, &model.b, &k1, &k2, costs.rho)?,
        residuals: Some(residuals(
            &model.a,
            &model.g(),
            &model.b,
            costs,
            &p11,
            &p12,
        )?),
        p11,
        k1,
        p12,
        k2,
        identified: Some(model),
        feedback_history: history,
        feedforward_history: None,
        ranks: data.ranks.clone(),
    };
    Ok(EquilibriumRun {
        solution,
        mean_field,
    })
}

/// Learned feedback and the model-free feedforward recursion (`G = αI`,
/// `Γ = βI`). `rollout(K₂)` must return the population average under
/// `u = −K₂ x`, which estimates `x̄*`.
pub fn run_model_free<T: Real>(
    data: &RegressionData<T>,
    costs: &CostWeights<T>,
    cfg: &SolverConfig<T>,
    rollout: impl FnOnce(&Matrix<T>) -> Result<Path<T>>,
) -> Result<EquilibriumRun<T>> {
    let history = opi_feedback(data, costs, cfg)
        .and_then(IterationHistory::into_result)
        .map_err(|e| e.in_stage("feedback"))?;
    let (p11, k1) = (history.last().p.clone(), history.last().k.clone());
    let k2_0 = cfg.k2_0.clone().unwrap_or_else(|| k1.clone());
    let ff = opi_feedforward_special(data, costs, &k2_0, cfg)
        .and_then(IterationHistory::into_result)
        .map_err(|e| e.in_stage("feedforward"))?;
    let (p12, k2) = (ff.last().p.clone(), ff.last().k.clone());
    let mean_field = rollout(&k2).map_err(|e| e.in_stage("mean-field rollout"))?;
    if mean_field.dim != data.n {
        return Err(Error::dims("mean-field rollout", data.n, mean_field.dim));
    }
    let solution = EquilibriumSolution {
        method: Method::ModelFree,
        p11,
        k1,
        p12,
        k2,
        identified: None,
        feedback_history: history,
        feedforward_history: Some(ff),
        ranks: data.ranks.clone(),
        certificates: Vec::new(),
        residuals: None,
    };
    Ok(EquilibriumRun {
        solution,
        mean_field,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyGap {
    pub max_gap: f64,
    /// Sample mean of `‖x_(N)(t) − x̄*(t)‖₂` over the grid.
    pub time_avg_gap: f64,
    pub peak_mean_field: f64,
}

impl ConsistencyGap {
    /// `time_avg_gap / max_t ‖x̄*(t)‖₂`.
    pub fn relative(&self) -> f64 {
        self.time_avg_gap / self.peak_mean_field.max(f64::MIN_POSITIVE)
    }
}

/// Distance between a simulated population average and the mean field.
pub fn consistency_check<T: Real>(
    population_average: &Path<T>,
    mean_field: &Path<T>,
) -> Result<ConsistencyGap> {
    if !population_average.grid.matches(&mean_field.grid) {
        return Err(Error::GridMismatch(
            "population average and mean field".into(),
        ));
    }
    if population_average.dim != mean_field.dim {
        return Err(Error::dims(
            "consistency_check",
            mean_field.dim,
            population_average.dim,
        ));
    }
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt().as_f64();
    let len = mean_field.len();
    let mut max_gap = 0.0f64;
    let mut total = 0.0;
    let mut peak = 0.0f64;
    for k in 0..len {
        let gap: Vec<T> = population_average
            .at(k)
            .iter()
            .zip(mean_field.at(k))
            .map(|(&a, &b)| a - b)
            .collect();
        let g = norm(&gap);
        max_gap = max_gap.max(g);
        total += g;
        peak = peak.max(norm(mean_field.at(k)));
    }
    Ok(ConsistencyGap {
        max_gap,
        time_avg_gap: total / len.max(1) as f64,
        peak_mean_field: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::example1;

    #[test]
    fn oracle_on_example_one() {
        let model = example1();
        let cfg = SolverConfig::new(Matrix::from_f64_rows(&[[35.0, 25.0]]).unwrap());
        let grid = TimeGrid::covering(1.0, 0.01).unwrap();
        let run = oracle_solution(&model, &cfg, grid).unwrap();
        let s = &run.solution;
        assert!(
            s.certificates.iter().all(|c| c.hurwitz),
            "{:?}",
            s.certificates
        );
        let res = s.residuals.unwrap();
        assert!(res.feedback < 1e-6 * (1.0 + s.p11.frobenius_norm()));
        assert!(res.feedforward < 1e-6 * (1.0 + s.p12.frobenius_norm()));
        assert_eq!(run.mean_field.at(0), model.init_mean.as_slice());
        let json = serde_json::to_string(s).unwrap();
        let back: EquilibriumSolution<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back.method, Method::Oracle);
    }

    #[test]
    fn consistency_of_identical_paths() {
        let grid = TimeGrid::<f64>::covering(1.0, 0.1).unwrap();
        let p = Path::from_fn(grid, 2, |t: f64| vec![1.0 - t, 2.0]).unwrap();
        let gap = consistency_check(&p, &p).unwrap();
        assert_eq!(gap.max_gap, 0.0);
        assert!((gap.peak_mean_field - 5f64.sqrt()).abs() < 1e-12);
        let shifted = p
            .add(&Path::from_fn(grid, 2, |_| vec![0.3, 0.4]).unwrap())
            .unwrap();
        let gap = consistency_check(&shifted, &p).unwrap();
        assert!((gap.time_avg_gap - 0.5).abs() < 1e-12);
        let other = Path::zeros(TimeGrid::covering(1.0, 0.05).unwrap(), 2);
        assert!(consistency_check(&other, &p).is_err());
    }
}
