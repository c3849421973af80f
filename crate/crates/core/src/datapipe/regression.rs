//! Stacked regression matrices and the excitation rank checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrals::{difference_at, integral_at, remove_increments, weights, window_nodes};
use super::plan::Quadrature;
use super::plan::SamplingPlan;
use crate::error::{Error, Result};
use crate::numkit::lstsq::{equilibrate_columns, rank_from_singular_values};
use crate::numkit::{compress_rows, singular_values, Matrix, DEFAULT_RANK_TOL};
use crate::population::ExpectationPaths;
use crate::scalar::Real;

/// Data of the error system `x̃`, `ũ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ErrorBlock<T> {
    /// `Δ_x̃x̃`, `l × n²`.
    pub d_xx: Matrix<T>,
    /// `Δ_colv(x̃)`, `l × n(n+1)/2`.
    pub d_colv: Matrix<T>,
    /// `I_x̃x̃`, `l × n²`.
    pub i_xx: Matrix<T>,
    /// `I_x̃ũ`, `l × nm`.
    pub i_xu: Matrix<T>,
}

/// Data of the average system `x̄`, `ū`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct AverageBlock<T> {
    pub d_xx: Matrix<T>,
    pub i_xx: Matrix<T>,
    pub i_xu: Matrix<T>,
}

/// Mixed error/average data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct CrossBlock<T> {
    /// `Δ_x̂`, compressed symmetrized difference, `l × n(n+1)/2`.
    pub d_hat: Matrix<T>,
    /// `I_x̃x̄`.
    pub i_tb: Matrix<T>,
    /// `I_x̄x̃`.
    pub i_bt: Matrix<T>,
    /// `I_x̃ū`.
    pub i_t_ub: Matrix<T>,
    /// `I_x̄ũ`.
    pub i_b_ut: Matrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `[I_colv(x̃), I_x̃ũ]` has rank `n(n+1)/2 + mn`.
    ErrorExcitation,
    /// Compressed `I_x̄x̄` has rank `n(n+1)/2`.
    AverageExcitation,
    /// Compressed `[I_x̃x̄ + I_x̄x̃, I_x̃ū + I_x̄ũ]` has rank `n(n+1)/2 + mn`.
    CrossExcitation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub assumption: Assumption,
    pub required: usize,
    pub achieved: usize,
    /// Smallest singular value counted towards the rank (0 if none).
    pub smallest_kept_sv: f64,
    /// Largest singular value below the threshold (0 if none).
    pub largest_discarded_sv: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct RegressionData<T> {
    pub n: usize,
    pub m: usize,
    pub rho: T,
    /// Window starts `t_k`.
    pub times: Vec<T>,
    pub error: ErrorBlock<T>,
    pub average: AverageBlock<T>,
    pub cross: Option<CrossBlock<T>>,
    /// Rank checks at the default tolerance.
    pub ranks: Vec<RankReport>,
}

impl<T: Real> RegressionData<T> {
    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn rank_report(&self, which: Assumption) -> Option<&RankReport> {
        self.ranks.iter().find(|r| r.assumption == which)
    }
}

fn stack<T: Real>(rows: &[Vec<Vec<T>>], which: usize) -> Matrix<T> {
    let cols = rows.first().map_or(0, |r| r[which].len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        data.extend_from_slice(&r[which]);
    }
    Matrix::from_vec(rows.len(), cols, data).expect("rows of equal width")
}

/// Builds every data matrix row by row, row `k` from window `[t_k, t_k + T]`.
pub fn build_regression_data<T: Real>(
    paths: &ExpectationPaths<T>,
    plan: &SamplingPlan<T>,
    rho: T,
    include_cross: bool,
) -> Result<RegressionData<T>> {
    plan.validate()?;
    let (n, m) = (paths.n(), paths.m());
    let (xt, ut, xb, ub) = (&paths.xt, &paths.ut, &paths.xb, &paths.ub);
    let first = window_nodes(xt, plan.start(0), plan.window, plan.quad_substep)?;
    let h = xt.grid.dt * T::lit(first.stride as f64);
    let w = weights(plan.quadrature, first.steps, h)?;
    let pairs: Vec<(&_, &_)> = if include_cross {
        vec![
            (xt, xt),
            (xt, ut),
            (xb, xb),
            (xb, ub),
            (xt, xb),
            (xb, xt),
            (xt, ub),
            (xb, ut),
        ]
    } else {
        vec![(xt, xt), (xt, ut), (xb, xb), (xb, ub)]
    };
    let rows: Vec<Vec<Vec<T>>> = (0..plan.l)
        .into_par_iter()
        .map(|k| {
            let nodes = window_nodes(xt, plan.start(k), plan.window, plan.quad_substep)?;
            let (a, b) = (nodes.i0, nodes.i0 + nodes.steps * nodes.stride);
            let mut row = vec![
                difference_at(xt, xt, a, b, rho, false),
                difference_at(xb, xb, a, b, rho, false),
            ];
            if include_cross {
                row.push(difference_at(xt, xb, a, b, rho, true));
            }
            if plan.quadrature == Quadrature::ProductRule {
                remove_increments(xt, xt, nodes, rho, false, &mut row[0]);
                remove_increments(xb, xb, nodes, rho, false, &mut row[1]);
                if include_cross {
                    remove_increments(xt, xb, nodes, rho, true, &mut row[2]);
                }
            }
            for &(x, y) in &pairs {
                let mut out = vec![T::zero(); x.dim * y.dim];
                integral_at(x, y, nodes, &w, rho, &mut out);
                row.push(out);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let d_off = if include_cross { 3 } else { 2 };
    let d_xx = stack(&rows, 0);
    let error = ErrorBlock {
        d_colv: compress_rows(&d_xx, n),
        d_xx,
        i_xx: stack(&rows, d_off),
        i_xu: stack(&rows, d_off + 1),
    };
    let average = AverageBlock {
        d_xx: stack(&rows, 1),
        i_xx: stack(&rows, d_off + 2),
        i_xu: stack(&rows, d_off + 3),
    };
    let cross = include_cross.then(|| CrossBlock {
        d_hat: compress_rows(&stack(&rows, 2), n),
        i_tb: stack(&rows, d_off + 4),
        i_bt: stack(&rows, d_off + 5),
        i_t_ub: stack(&rows, d_off + 6),
        i_b_ut: stack(&rows, d_off + 7),
    });
    let mut data = RegressionData {
        n,
        m,
        rho,
        times: plan.starts(),
        error,
        average,
        cross,
        ranks: Vec::new(),
    };
    data.ranks = check_assumptions(&data, T::tol(DEFAULT_RANK_TOL));
    Ok(data)
}

fn rank_report<T: Real>(
    assumption: Assumption,
    m: &Matrix<T>,
    required: usize,
    rel_tol: T,
) -> RankReport {
    let (scaled, _) = equilibrate_columns(m);
    let sv = singular_values(&scaled);
    let achieved = rank_from_singular_values(&sv, rel_tol);
    let kept = if achieved > 0 {
        sv[achieved - 1].as_f64()
    } else {
        0.0
    };
    let dropped = sv.get(achieved).map_or(0.0, |s| s.as_f64());
    RankReport {
        assumption,
        required,
        achieved,
        smallest_kept_sv: kept,
        largest_discarded_sv: dropped,
        satisfied: achieved >= required && m.rows() >= required,
    }
}

/// Half-sum `½(I_x̃x̄ + I_x̄x̃)`.
pub fn symmetric_cross_integral<T: Real>(cross: &CrossBlock<T>) -> Matrix<T> {
    (&cross.i_tb + &cross.i_bt).scale(T::lit(0.5))
}

/// Rank conditions on the compressed blocks, one report per assumption
/// whose data is present.
pub fn check_assumptions<T: Real>(data: &RegressionData<T>, rel_tol: T) -> Vec<RankReport> {
    let (n, m) = (data.n, data.m);
    let s = n * (n + 1) / 2;
    let mut out = Vec::with_capacity(3);
    let colv = compress_rows(&data.error.i_xx, n);
    let a1 = Matrix::hstack(&colv, &data.error.i_xu).expect("equal row counts");
    out.push(rank_report(
        Assumption::ErrorExcitation,
        &a1,
        s + m * n,
        rel_tol,
    ));
    let a2 = compress_rows(&data.average.i_xx, n);
    out.push(rank_report(Assumption::AverageExcitation, &a2, s, rel_tol));
    if let Some(c) = &data.cross {
        let hat = compress_rows(&symmetric_cross_integral(c), n);
        let a3 = Matrix::hstack(&hat, &(&c.i_t_ub + &c.i_b_ut)).expect("equal row counts");
        out.push(rank_report(
            Assumption::CrossExcitation,
            &a3,
            s + m * n,
            rel_tol,
        ));
    }
    out
}

/// Fails with [`Error::RankDeficient`] unless `which` is satisfied.
pub fn require(data: &RegressionData<impl Real>, which: Assumption) -> Result<()> {
    let r = data
        .rank_report(which)
        .ok_or_else(|| Error::InvalidArgument(format!("no data for {which:?}")))?;
    if r.satisfied {
        Ok(())
    } else {
        Err(Error::RankDeficient {
            context: format!("{which:?} rank condition"),
            rank: r.achieved,
            required: r.required,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{colm, SymMatrix};
    use crate::population::{Path, TimeGrid};

    fn const_paths(x: Vec<f64>, u: Vec<f64>, horizon: f64, dt: f64) -> ExpectationPaths<f64> {
        let g = TimeGrid::<f64>::covering(horizon, dt).unwrap();
        let xp = Path::from_fn(g, x.len(), |_| x.clone()).unwrap();
        let up = Path::from_fn(g, u.len(), |_| u.clone()).unwrap();
        ExpectationPaths::new(xp.clone(), up.clone(), xp, up).unwrap()
    }

    #[test]
    fn constant_paths_single_row() {
        let p = const_paths(vec![1.0, 2.0], vec![3.0], 1.0, 0.1);
        let plan = SamplingPlan::new(0.0, 1, 0.1, 0.5);
        let d = build_regression_data(&p, &plan, 0.0, true).unwrap();
        assert!(d.error.d_xx.max_abs() == 0.0 && d.error.d_colv.max_abs() == 0.0);
        let expect = [1.0, 2.0, 2.0, 4.0].map(|v| v * 0.5);
        for (a, b) in d.error.i_xx.row(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((d.error.i_xu[(0, 1)] - 3.0).abs() < 1e-12);
        assert_eq!(d.error.d_colv.cols(), 3);
        assert!(d.cross.is_some());
        // one row cannot excite anything beyond rank 1
        assert!(!d.ranks[0].satisfied);
    }

    #[test]
    fn zero_paths_have_zero_rank() {
        let p = const_paths(vec![0.0, 0.0], vec![0.0], 2.0, 0.1);
        let plan = SamplingPlan::new(0.0, 10, 0.1, 0.5);
        let d = build_regression_data(&p, &plan, 0.1, true).unwrap();
        assert!(d.ranks.iter().all(|r| r.achieved == 0 && !r.satisfied));
        assert!(require(&d, Assumption::ErrorExcitation).is_err());
    }

    #[test]
    fn compressed_difference_contracts_like_colm() {
        let g = TimeGrid::<f64>::covering(1.0, 0.01).unwrap();
        let xt = Path::from_fn(g, 2, |t: f64| vec![t.sin(), t.cos() + 0.5]).unwrap();
        let xb = Path::from_fn(g, 2, |t: f64| vec![2.0 * t, (2.0 * t).sin()]).unwrap();
        let u = Path::from_fn(g, 1, |t: f64| vec![t]).unwrap();
        let paths = ExpectationPaths::new(xt, u.clone(), xb, u).unwrap();
        let plan = SamplingPlan::new(0.0, 5, 0.1, 0.3);
        let d = build_regression_data(&paths, &plan, 0.2, true).unwrap();
        let p = SymMatrix::from_packed(2, vec![1.5, -0.3, 2.0]).unwrap();
        let full = crate::numkit::col(&p.to_matrix());
        let cm = colm(&p);
        let c = d.cross.as_ref().unwrap();
        let lhs = c.d_hat.matvec(&cm);
        // δ_x̂ · colm(P) = e^{-ρ(t+T)} x̃ᵀP x̄ |_{t+T} - e^{-ρt} x̃ᵀP x̄ |_t
        for k in 0..plan.l {
            let a = (plan.start(k) / 0.01).round() as usize;
            let b = a + 30;
            let q = |i: usize| {
                let (x, y) = (paths.xt.at(i), paths.xb.at(i));
                let py = p.to_matrix().matvec(y);
                (-0.2 * g.time(i)).exp() * (x[0] * py[0] + x[1] * py[1])
            };
            assert!((lhs[k] - (q(b) - q(a))).abs() < 1e-12);
        }
        let sym = symmetric_cross_integral(c);
        let hat = compress_rows(&sym, 2);
        let r1 = sym.matvec(&full);
        let r2 = hat.matvec(&cm);
        for (a, b) in r1.iter().zip(&r2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn window_outside_domain_propagates() {
        let p = const_paths(vec![1.0], vec![1.0], 1.0, 0.1);
        let plan = SamplingPlan::new(0.0, 20, 0.1, 0.5);
        assert!(matches!(
            build_regression_data(&p, &plan, 0.0, false),
            Err(Error::WindowOutOfRange { .. })
        ));
    }
}
