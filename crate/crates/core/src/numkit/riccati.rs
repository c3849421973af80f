//! Model-based Riccati solvers: Kleinman policy iteration, Hamiltonian
//! stable-subspace solutions and the symmetric feedforward recursion.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::eigen::{eigenvalues, eigenvector, spectral, HURWITZ_MARGIN};
use super::lstsq::least_squares;
use super::matrix::Matrix;
use super::sylvester::solve_sylvester;
use crate::error::{Error, Result};
use crate::model::LqgGameModel;
use crate::scalar::Real;

/// `‖P‖_F` may grow at most this factor over the first iterate.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CriterionMet,
    MaxIter,
    RankDeficient,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct Iterate<T> {
    pub p: Matrix<T>,
    pub k: Matrix<T>,
    /// `‖Pᵏ − Pᵏ⁻¹‖_F` with `P⁰ = 0`.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct IterationHistory<T> {
    pub iterates: Vec<Iterate<T>>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl<T: Real> IterationHistory<T> {
    pub fn last(&self) -> &Iterate<T> {
        self.iterates.last().expect("histories are non-empty")
    }

    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    /// Turns a non-converged history into the matching error.
    pub fn into_result(self) -> Result<Self> {
        match self.stop_reason {
            StopReason::CriterionMet => Ok(self),
            StopReason::MaxIter => Err(Error::NoConvergence {
                iterations: self.len(),
                last_residual: self.last().residual.as_f64(),
            }),
            StopReason::Divergence => Err(Error::Divergence {
                iteration: self.len(),
                initial: self.iterates[0].p.frobenius_norm().as_f64(),
                current: self.last().p.frobenius_norm().as_f64(),
            }),
            StopReason::RankDeficient => Err(Error::RankDeficient {
                context: format!("iteration {}", self.len() + 1),
                rank: 0,
                required: 0,
            }),
        }
    }
}

/// Stopping rule shared by every policy iteration in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule<T> {
    pub xi: T,
    pub max_iter: usize,
}

/// Drives `step(k_prev) -> (P, K)` from `k0` until `‖Pᵏ − Pᵏ⁻¹‖_F ≤ ξ`.
///
/// Rank deficiency inside `step` ends the run with
/// [`StopReason::RankDeficient`] unless no iterate has been produced yet,
/// in which case the error is returned.
pub(crate) fn iterate_policy<T: Real>(
    k0: &Matrix<T>,
    rule: StopRule<T>,
    mut step: impl FnMut(&Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)>,
) -> Result<IterationHistory<T>> {
    if !(rule.xi > T::zero()) || rule.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "xi must be positive and max_iter at least 1".into(),
        ));
    }
    let mut iterates: Vec<Iterate<T>> = Vec::new();
    let mut k_prev = k0.clone();
    let mut stop_reason = StopReason::MaxIter;
    while iterates.len() < rule.max_iter {
        let (p, k) = match step(&k_prev) {
            Ok(pk) => pk,
            Err(e @ Error::RankDeficient { .. }) if iterates.is_empty() => return Err(e),
            Err(Error::RankDeficient { .. }) => {
                stop_reason = StopReason::RankDeficient;
                break;
            }
            Err(e) => return Err(e),
        };
        if !p.is_finite() || !k.is_finite() {
            stop_reason = StopReason::Divergence;
            if iterates.is_empty() {
                return Err(Error::Divergence {
                    iteration: 1,
                    initial: f64::NAN,
                    current: f64::NAN,
                });
            }
            break;
        }
        let residual = match iterates.last() {
            Some(prev) => (&p - &prev.p).frobenius_norm(),
            None => p.frobenius_norm(),
        };
        let norm = p.frobenius_norm();
        let initial = iterates.first().map_or(norm, |it| it.p.frobenius_norm());
        iterates.push(Iterate {
            p,
            k: k.clone(),
            residual,
        });
        if norm > T::lit(DIVERGENCE_FACTOR) * initial.max(T::min_positive_value()) {
            stop_reason = StopReason::Divergence;
            break;
        }
        if residual <= rule.xi {
            stop_reason = StopReason::CriterionMet;
            break;
        }
        k_prev = k;
    }
    Ok(IterationHistory {
        converged: stop_reason == StopReason::CriterionMet,
        iterates,
        stop_reason,
    })
}

pub(crate) fn shifted<T: Real>(m: &Matrix<T>, shift: T) -> Matrix<T> {
    let mut out = m.clone();
    for i in 0..m.rows() {
        out[(i, i)] -= shift;
    }
    out
}

fn check_square<T: Real>(ctx: &'static str, m: &Matrix<T>, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::dims(
            ctx,
            format!("{n}x{n}"),
            format!("{:?}", m.shape()),
        ));
    }
    Ok(())
}

/// Kleinman iteration with the full record of iterates; non-convergence is
/// reported through the stop reason.
#[allow(clippy::too_many_arguments)]
pub fn kleinman_history<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    rho: T,
    k0: &Matrix<T>,
    xi: T,
    max_iter: usize,
) -> Result<IterationHistory<T>> {
    let n = a.rows();
    check_square("kleinman A", a, n)?;
    check_square("kleinman Q", q, n)?;
    let m = b.cols();
    if b.rows() != n || k0.shape() != (m, n) || r.shape() != (m, m) {
        return Err(Error::dims(
            "kleinman B/K0/R",
            format!("B {n}x{m}, K0 {m}x{n}, R {m}x{m}"),
            "other",
        ));
    }
    let half_rho = rho * T::lit(0.5);
    let report = spectral(&(a - &(b * k0)), half_rho)?;
    if !report.hurwitz {
        return Err(Error::NotStabilizing {
            margin: (report.stability_margin - half_rho).as_f64(),
        });
    }
    let rinv_bt = r.solve(&b.transpose())?;
    iterate_policy(k0, StopRule { xi, max_iter }, |k| {
        let ac = shifted(&(a - &(b * k)), half_rho);
        let cost = &(&(&k.transpose() * r) * k) + q;
        let p = solve_sylvester(&ac.transpose(), &ac, &cost)?.symmetrize();
        let k_next = &rinv_bt * &p;
        Ok((p, k_next))
    })
}

/// Model-based policy iteration for `ρP = PA + AᵀP − PBR⁻¹BᵀP + Q`.
///
/// Each step solves `(A−BK−ρ/2 I)ᵀP + P(A−BK−ρ/2 I) + KᵀRK + Q = 0` and
/// updates `K = R⁻¹BᵀP`.
#[allow(clippy::too_many_arguments)]
pub fn kleinman_solve<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    rho: T,
    k0: &Matrix<T>,
    xi: T,
    max_iter: usize,
) -> Result<IterationHistory<T>> {
    kleinman_history(a, b, q, r, rho, k0, xi, max_iter)?.into_result()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianKind {
    H1,
    H2,
}

/// `H1 = [[A−ρ/2 I, −S], [−Q, −Aᵀ+ρ/2 I]]` and
/// `H2 = [[A+G−ρ/2 I, −S], [QΓ−Q, −Aᵀ+ρ/2 I]]` with `S = BR⁻¹Bᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn hamiltonian_parts<T: Real>(
    a: &Matrix<T>,
    g: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    gamma: &Matrix<T>,
    rho: T,
    which: HamiltonianKind,
) -> Result<Matrix<T>> {
    let n = a.rows();
    for (ctx, m) in [
        ("hamiltonian A", a),
        ("hamiltonian G", g),
        ("hamiltonian Q", q),
        ("hamiltonian Gamma", gamma),
    ] {
        check_square(ctx, m, n)?;
    }
    if b.rows() != n || r.shape() != (b.cols(), b.cols()) {
        return Err(Error::dims(
            "hamiltonian B/R",
            format!("B {n}xm, R mxm"),
            format!("{:?} {:?}", b.shape(), r.shape()),
        ));
    }
    let half_rho = rho * T::lit(0.5);
    let s = b * &r.solve(&b.transpose())?;
    let (top_left, bottom_left) = match which {
        HamiltonianKind::H1 => (shifted(a, half_rho), -q),
        HamiltonianKind::H2 => (shifted(&(a + g), half_rho), &(q * gamma) - q),
    };
    let bottom_right = shifted(&a.transpose(), half_rho).scale(-T::one());
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.set_block(0, 0, &top_left);
    h.set_block(0, n, &(-&s));
    h.set_block(n, 0, &bottom_left);
    h.set_block(n, n, &bottom_right);
    Ok(h)
}

pub fn hamiltonian<T: Real>(model: &LqgGameModel<T>, which: HamiltonianKind) -> Result<Matrix<T>> {
    hamiltonian_parts(
        &model.a,
        &model.g,
        &model.b,
        &model.q,
        &model.r,
        &model.gamma,
        model.rho,
        which,
    )
}

/// `P = Z₂ Z₁⁻¹` for the stable invariant subspace `span [Z₁; Z₂]` of `h`.
///
/// The basis comes from eigenvectors; when that basis is ill-conditioned
/// (clustered eigenvalues) the matrix sign function is used instead.
pub fn stable_graph_solution<T: Real>(h: &Matrix<T>) -> Result<Matrix<T>> {
    let two_n = h.rows();
    if !h.is_square() || !two_n.is_multiple_of(2) {
        return Err(Error::dims(
            "stable_graph_solution",
            "2n x 2n",
            format!("{:?}", h.shape()),
        ));
    }
    let n = two_n / 2;
    let eig = eigenvalues(h)?;
    let tol = T::tol(HURWITZ_MARGIN) * (T::one() + h.norm_inf());
    let stable: Vec<Complex<T>> = eig.iter().copied().filter(|z| z.re < -tol).collect();
    let unstable = eig.iter().filter(|z| z.re > tol).count();
    let marginal = two_n - stable.len() - unstable;
    if stable.len() != n || marginal > 0 {
        return Err(Error::NotCSplitting {
            stable: stable.len(),
            unstable,
            marginal,
        });
    }
    let accept = |p: &Matrix<T>| {
        invariance_residual(h, p)
            <= T::tol(1e-8) * (T::one() + h.norm_inf() * (T::one() + p.norm_inf()))
    };
    match eigen_basis_solution(h, &stable) {
        Ok(p) if accept(&p) => return Ok(p),
        Err(Error::NotGraphSubspace) => return Err(Error::NotGraphSubspace),
        _ => {}
    }
    let p = sign_function_solution(h)?;
    if accept(&p) {
        Ok(p)
    } else {
        Err(Error::NotGraphSubspace)
    }
}

/// `‖[P, −I] H [I; P]‖_max`, which vanishes iff `[I; P]` is invariant.
fn invariance_residual<T: Real>(h: &Matrix<T>, p: &Matrix<T>) -> T {
    let n = p.rows();
    let h11 = h.submatrix(0, 0, n, n);
    let h12 = h.submatrix(0, n, n, n);
    let h21 = h.submatrix(n, 0, n, n);
    let h22 = h.submatrix(n, n, n, n);
    let top = &h11 + &(&h12 * p);
    let lhs = &h21 + &(&h22 * p);
    (&lhs - &(p * &top)).max_abs()
}

fn eigen_basis_solution<T: Real>(h: &Matrix<T>, stable: &[Complex<T>]) -> Result<Matrix<T>> {
    let n = h.rows() / 2;
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut i = 0;
    while i < stable.len() {
        let lam = stable[i];
        let v = eigenvector(h, lam)?;
        if lam.im.abs() > T::zero() {
            cols.push(v.iter().map(|z| z.re).collect());
            cols.push(v.iter().map(|z| z.im).collect());
            // skip the conjugate partner
            i += 2;
        } else {
            cols.push(v.iter().map(|z| z.re).collect());
            i += 1;
        }
    }
    if cols.len() != n {
        return Err(Error::Singular {
            context: "stable eigenbasis",
        });
    }
    let z = Matrix::from_fn(2 * n, n, |r, c| cols[c][r]);
    let z1 = z.submatrix(0, 0, n, n);
    let z2 = z.submatrix(n, 0, n, n);
    // P Z1 = Z2  <=>  Z1ᵀ Pᵀ = Z2ᵀ
    let pt = z1
        .transpose()
        .solve(&z2.transpose())
        .map_err(|_| Error::Singular { context: "Z1" })?;
    Ok(pt.transpose())
}

/// Newton iteration for `sign(H)` with determinant scaling, then the
/// stacked system `[W₁₂; W₂₂+I] P = −[W₁₁+I; W₂₁]`.
fn sign_function_solution<T: Real>(h: &Matrix<T>) -> Result<Matrix<T>> {
    let two_n = h.rows();
    let n = two_n / 2;
    let mut w = h.clone();
    let half = T::lit(0.5);
    for _ in 0..100 {
        let lu = w.lu().map_err(|_| Error::NotGraphSubspace)?;
        let winv = lu.solve(&Matrix::identity(two_n))?;
        let log_det: T = (0..two_n).map(|i| lu_diag_abs_log(&lu, i)).sum();
        let c = (-log_det / T::lit(two_n as f64)).exp();
        let next = (&w.scale(c) + &winv.scale(T::one() / c)).scale(half);
        let delta = (&next - &w).norm_one();
        let size = next.norm_one();
        w = next;
        if delta <= T::tol(1e-12) * size {
            break;
        }
    }
    let ident = Matrix::identity(n);
    let w11 = w.submatrix(0, 0, n, n);
    let w12 = w.submatrix(0, n, n, n);
    let w21 = w.submatrix(n, 0, n, n);
    let w22 = w.submatrix(n, n, n, n);
    let lhs = Matrix::vstack(&w12, &(&w22 + &ident))?;
    let rhs = Matrix::vstack(&(&w11 + &ident), &w21)?.scale(-T::one());
    let mut p = Matrix::zeros(n, n);
    for j in 0..n {
        let sol = least_squares(&lhs, &rhs.column(j), T::tol(1e-10))
            .map_err(|_| Error::NotGraphSubspace)?;
        for (i, v) in sol.theta.into_iter().enumerate() {
            p[(i, j)] = v;
        }
    }
    Ok(p)
}

fn lu_diag_abs_log<T: Real>(lu: &super::matrix::Lu<T>, i: usize) -> T {
    lu.pivot(i).abs().ln()
}

/// Model-based recursion for the symmetric feedforward ARE arising when
/// `G = αI`, `Γ = βI`:
/// `ρP = P(A+G−BK) + (A−BK)ᵀP + KᵀRK + Q − QΓ`, `K = R⁻¹BᵀP`.
///
/// The Sylvester solve is not symmetrized; `symmetrize` applies the
/// symmetric part to each iterate.
#[allow(clippy::too_many_arguments)]
pub fn special_feedforward_history<T: Real>(
    a: &Matrix<T>,
    g: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    gamma: &Matrix<T>,
    rho: T,
    k0: &Matrix<T>,
    rule: StopRule<T>,
    symmetrize: bool,
) -> Result<IterationHistory<T>> {
    let half_rho = rho * T::lit(0.5);
    let ag = a + g;
    for (ctx, m) in [("A - BK2_0", a), ("A + G - BK2_0", &ag)] {
        let rep = spectral(&(m - &(b * k0)), half_rho)?;
        if !rep.hurwitz {
            let e = Error::NotStabilizing {
                margin: (rep.stability_margin - half_rho).as_f64(),
            };
            return Err(e.in_stage(ctx));
        }
    }
    let rinv_bt = r.solve(&b.transpose())?;
    let q_term = q - &(q * gamma);
    iterate_policy(k0, rule, |k| {
        let bk = b * k;
        let f = shifted(&(a - &bk), half_rho).transpose();
        let gg = shifted(&(&ag - &bk), half_rho);
        let cost = &(&(&k.transpose() * r) * k) + &q_term;
        let mut p = solve_sylvester(&f, &gg, &cost)?;
        if symmetrize {
            p = p.symmetrize();
        }
        let k_next = &rinv_bt * &p;
        Ok((p, k_next))
    })
}

/// Frobenius residual of `ρP = P F + AᵀP − P S P + C` where `F = A` (with
/// `C = Q`) or `F = A + G` (with `C = Q − QΓ`).
#[allow(clippy::too_many_arguments)]
pub fn are_residual<T: Real>(
    a: &Matrix<T>,
    g: &Matrix<T>,
    b: &Matrix<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    gamma: &Matrix<T>,
    rho: T,
    p: &Matrix<T>,
    which: HamiltonianKind,
) -> Result<T> {
    let s = b * &r.solve(&b.transpose())?;
    let (f, c) = match which {
        HamiltonianKind::H1 => (a.clone(), q.clone()),
        HamiltonianKind::H2 => (a + g, q - &(q * gamma)),
    };
    let res = &(&(&(&(p * &f) + &(&a.transpose() * p)) - &(&(p * &s) * p)) + &c) - &p.scale(rho);
    Ok(res.frobenius_norm())
}
