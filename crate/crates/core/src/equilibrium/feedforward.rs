//! Feedforward gain: certainty equivalence on an identified model, the
//! model-free recursion of the symmetric case, and the mean-field ODE.

use crate::datapipe::{require, symmetric_cross_integral, Assumption, RegressionData};
use crate::error::{Error, Result};
use crate::numkit::riccati::iterate_policy;
use crate::numkit::{
    col, expm, hamiltonian_parts, least_squares, spectral, stable_graph_solution, HamiltonianKind,
    IterationHistory, Matrix,
};
use crate::population::{Path, TimeGrid};
use crate::scalar::Real;

use super::config::{CostWeights, SolverConfig};
use super::feedback::{check_costs, design, split_theta};

/// `(P₁₂, K₂)` from the stable graph subspace of the `H2` Hamiltonian built
/// on `(Â, (A+G)^, B̂)`; `K₂ = R⁻¹B̂ᵀP₁₂`.
pub fn certainty_equivalence_feedforward<T: Real>(
    a_hat: &Matrix<T>,
    ag_hat: &Matrix<T>,
    b_hat: &Matrix<T>,
    costs: &CostWeights<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let g_hat = ag_hat - a_hat;
    let h = hamiltonian_parts(
        a_hat,
        &g_hat,
        b_hat,
        &costs.q,
        &costs.r,
        &costs.gamma,
        costs.rho,
        HamiltonianKind::H2,
    )?;
    let p12 = stable_graph_solution(&h)?;
    let k2 = costs.r.solve(&(&b_hat.transpose() * &p12))?;
    let half_rho = costs.rho * T::lit(0.5);
    let rep = spectral(&(ag_hat - &(b_hat * &k2)), half_rho)?;
    if !rep.hurwitz {
        return Err(Error::NotStabilizing {
            margin: (rep.stability_margin - half_rho).as_f64(),
        });
    }
    Ok((p12, k2))
}

/// `x̄*(t) = exp((A+G−BK₂)t) x̄₀` on every node of `grid`.
pub fn mean_field_trajectory<T: Real>(
    ag: &Matrix<T>,
    b: &Matrix<T>,
    k2: &Matrix<T>,
    xbar0: &[T],
    grid: TimeGrid<T>,
) -> Result<Path<T>> {
    let n = ag.rows();
    if xbar0.len() != n || b.rows() != n || k2.shape() != (b.cols(), n) {
        return Err(Error::dims(
            "mean_field_trajectory",
            format!("n = {n}"),
            "inconsistent shapes",
        ));
    }
    let cl = ag - &(b * k2);
    let mut data = Vec::with_capacity(grid.len * n);
    for k in 0..grid.len {
        let e = expm(&cl.scale(grid.time(k) - grid.t0))?;
        data.extend(e.matvec(xbar0));
    }
    Path::new(grid, n, data)
}

/// Model-free feedforward recursion for `G = αI`, `Γ = βI`:
/// `Ψ₄(K) [colm(P); col(K')] = −½(I_x̃x̄ + I_x̄x̃) col(KᵀRK + Q − QΓ)` from
/// `K₂⁰`.
pub fn opi_feedforward_special<T: Real>(
    data: &RegressionData<T>,
    costs: &CostWeights<T>,
    k2_0: &Matrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<IterationHistory<T>> {
    check_costs(data, costs)?;
    let (n, m) = (data.n, data.m);
    if k2_0.shape() != (m, n) {
        return Err(Error::dims(
            "K2_0",
            format!("{m}x{n}"),
            format!("{:?}", k2_0.shape()),
        ));
    }
    let q_term = &costs.q - &(&costs.q * &costs.gamma);
    let scale = T::one() + q_term.max_abs();
    if !q_term.is_symmetric(T::tol(1e-12) * scale) {
        return Err(Error::InvalidArgument(
            "Q − QΓ must be symmetric for the symmetric feedforward recursion".into(),
        ));
    }
    let c = data
        .cross
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("regression data lack the cross block".into()))?;
    require(data, Assumption::CrossExcitation)?;
    let i_sum = &c.i_tb + &c.i_bt;
    let i_u = &c.i_t_ub + &c.i_b_ut;
    let i_half = symmetric_cross_integral(c);
    iterate_policy(k2_0, cfg.rule(), |k| {
        let psi = design(&c.d_hat, &i_sum, &i_u, k, &costs.r, T::one());
        let w = &(&(&k.transpose() * &costs.r) * k) + &q_term;
        let xi: Vec<T> = i_half.matvec(&col(&w)).into_iter().map(|v| -v).collect();
        let fit = least_squares(&psi, &xi, cfg.rank_tol)?;
        split_theta(&fit.theta, n, m)
    })
}
