//! Expectation paths of the error and average systems, estimated from an
//! ensemble or integrated exactly from their deterministic dynamics.

use serde::{Deserialize, Serialize};

use super::noise::AgentProbe;
use super::path::{Path, TimeGrid};
use super::simulate::EnsembleTrajectories;
use crate::error::{Error, Result};
use crate::model::LqgGameModel;
use crate::numkit::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    /// `E[xᵢ − xⱼ]`, `E[uᵢ − uⱼ]` for two tracked agents.
    PairDifference(usize, usize),
    /// `E[x_(N)]`, `E[u_(N)]`.
    PopulationAverage,
}

/// `x̃`, `ũ`, `x̄`, `ū` on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationPaths<T> {
    pub grid: TimeGrid<T>,
    pub xt: Path<T>,
    pub ut: Path<T>,
    pub xb: Path<T>,
    pub ub: Path<T>,
}

impl<T: Real> ExpectationPaths<T> {
    pub fn new(xt: Path<T>, ut: Path<T>, xb: Path<T>, ub: Path<T>) -> Result<Self> {
        let grid = xt.grid;
        if [&ut, &xb, &ub].iter().any(|p| !p.grid.matches(&grid)) {
            return Err(Error::GridMismatch(
                "expectation paths must share one grid".into(),
            ));
        }
        if xb.dim != xt.dim || ub.dim != ut.dim {
            return Err(Error::dims(
                "expectation paths",
                format!("{} / {}", xt.dim, ut.dim),
                format!("{} / {}", xb.dim, ub.dim),
            ));
        }
        Ok(Self {
            grid,
            xt,
            ut,
            xb,
            ub,
        })
    }

    /// Pair-difference paths from one ensemble, average paths from another.
    pub fn from_ensembles(
        error_data: &EnsembleTrajectories<T>,
        pair: (usize, usize),
        average_data: &EnsembleTrajectories<T>,
    ) -> Result<Self> {
        let (xt, ut) =
            expectation_paths(error_data, ExpectationMode::PairDifference(pair.0, pair.1))?;
        let (xb, ub) = expectation_paths(average_data, ExpectationMode::PopulationAverage)?;
        Self::new(xt, ut, xb, ub)
    }

    pub fn n(&self) -> usize {
        self.xt.dim
    }

    pub fn m(&self) -> usize {
        self.ut.dim
    }
}

/// Monte-Carlo estimate of the state and input expectation in `mode`.
pub fn expectation_paths<T: Real>(
    ens: &EnsembleTrajectories<T>,
    mode: ExpectationMode,
) -> Result<(Path<T>, Path<T>)> {
    match mode {
        ExpectationMode::PairDifference(i, j) => {
            if i == j {
                return Err(Error::InvalidArgument(
                    "pair difference needs two distinct agents".into(),
                ));
            }
            let (si, sj) = (ens.tracked_index(i)?, ens.tracked_index(j)?);
            let x = ens.mean.agent_states[si].sub(&ens.mean.agent_states[sj])?;
            let u = ens.mean.agent_inputs[si].sub(&ens.mean.agent_inputs[sj])?;
            Ok((x, u))
        }
        ExpectationMode::PopulationAverage => {
            Ok((ens.mean.avg_state.clone(), ens.mean.avg_input.clone()))
        }
    }
}

/// `x_(N)(t)` averaged over realizations.
pub fn population_average_state<T: Real>(ens: &EnsembleTrajectories<T>) -> Path<T> {
    ens.mean.avg_state.clone()
}

/// Classical fourth-order Runge–Kutta solution of `x' = F x + B u`,
/// `u = −K x + v(t)`, sampled on `grid` with `substeps` inner steps per
/// grid interval. Returns the state and input paths.
pub fn closed_loop_rk4<T: Real>(
    f: &Matrix<T>,
    b: &Matrix<T>,
    k: &Matrix<T>,
    x0: &[T],
    v: impl Fn(T) -> Vec<T>,
    grid: TimeGrid<T>,
    substeps: usize,
) -> Result<(Path<T>, Path<T>)> {
    let (n, m) = (f.rows(), b.cols());
    if f.shape() != (n, n) || b.rows() != n || k.shape() != (m, n) || x0.len() != n {
        return Err(Error::dims(
            "closed_loop_rk4",
            format!("F {n}x{n}, B {n}x{m}, K {m}x{n}"),
            "inconsistent shapes",
        ));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    let input = |t: T, x: &[T]| -> Vec<T> {
        let kx = k.matvec(x);
        let vt = v(t);
        (0..m).map(|r| vt[r] - kx[r]).collect()
    };
    let rhs = |t: T, x: &[T]| -> Vec<T> {
        let u = input(t, x);
        let fx = f.matvec(x);
        let bu = b.matvec(&u);
        (0..n).map(|r| fx[r] + bu[r]).collect()
    };
    let axpy =
        |x: &[T], s: T, d: &[T]| -> Vec<T> { x.iter().zip(d).map(|(&a, &b)| a + s * b).collect() };
    let h = grid.dt / T::lit(substeps as f64);
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let mut xs = Vec::with_capacity(grid.len * n);
    let mut us = Vec::with_capacity(grid.len * m);
    let mut x = x0.to_vec();
    for idx in 0..grid.len {
        let t = grid.time(idx);
        xs.extend_from_slice(&x);
        us.extend(input(t, &x));
        if idx + 1 == grid.len {
            break;
        }
        for s in 0..substeps {
            let ts = t + h * T::lit(s as f64);
            let k1 = rhs(ts, &x);
            let k2 = rhs(ts + half, &axpy(&x, half, &k1));
            let k3 = rhs(ts + half, &axpy(&x, half, &k2));
            let k4 = rhs(ts + h, &axpy(&x, h, &k3));
            for r in 0..n {
                x[r] += sixth * (k1[r] + T::lit(2.0) * (k2[r] + k3[r]) + k4[r]);
            }
        }
    }
    Ok((Path::new(grid, n, xs)?, Path::new(grid, m, us)?))
}

/// Expectation paths integrated from the deterministic error and average
/// dynamics, as if `M → ∞`:
///
/// `x̃' = A x̃ + B ũ`, `ũ = −K x̃ + ℓᵢ − ℓⱼ`, `x̃(0) = 0`, and
/// `x̄' = (A + G) x̄ + B ū`, `ū = −K x̄ + ℓ̄`, `x̄(0) = x̄₀`,
/// where `ℓ̄` averages `average_probes` over agents.
pub fn exact_expectation_paths<T: Real>(
    model: &LqgGameModel<T>,
    k: &Matrix<T>,
    pair_probes: (&AgentProbe<T>, &AgentProbe<T>),
    average_probes: &[AgentProbe<T>],
    grid: TimeGrid<T>,
    substeps: usize,
) -> Result<ExpectationPaths<T>> {
    let (n, m) = (model.n(), model.m());
    let channels_ok = |p: &AgentProbe<T>| p.len() == m;
    if !channels_ok(pair_probes.0)
        || !channels_ok(pair_probes.1)
        || !average_probes.iter().all(channels_ok)
    {
        return Err(Error::dims("probe channels", m, "mismatched"));
    }
    let (pi, pj) = pair_probes;
    let diff = |t: T| -> Vec<T> { (0..m).map(|c| pi[c].value(t) - pj[c].value(t)).collect() };
    let (xt, ut) = closed_loop_rk4(
        &model.a,
        &model.b,
        k,
        &vec![T::zero(); n],
        diff,
        grid,
        substeps,
    )?;
    let inv = if average_probes.is_empty() {
        T::zero()
    } else {
        T::one() / T::lit(average_probes.len() as f64)
    };
    let mean = |t: T| -> Vec<T> {
        (0..m)
            .map(|c| average_probes.iter().map(|p| p[c].value(t)).sum::<T>() * inv)
            .collect()
    };
    let (xb, ub) = closed_loop_rk4(
        &model.a_plus_g(),
        &model.b,
        k,
        &model.init_mean,
        mean,
        grid,
        substeps,
    )?;
    ExpectationPaths::new(xt, ut, xb, ub)
}
