//! Off-policy iteration for the feedback gain from error-path data.

use crate::datapipe::{require, Assumption, RegressionData};
use crate::error::{Error, Result};
use crate::numkit::riccati::iterate_policy;
use crate::numkit::{col, kron, least_squares, uncol, uncolm, IterationHistory, Matrix};
use crate::scalar::Real;

use super::config::{CostWeights, SolverConfig};

pub(crate) fn check_costs<T: Real>(data: &RegressionData<T>, costs: &CostWeights<T>) -> Result<()> {
    let (n, m) = (data.n, data.m);
    if costs.q.shape() != (n, n) || costs.r.shape() != (m, m) || costs.gamma.shape() != (n, n) {
        return Err(Error::dims(
            "cost weights",
            format!("Q {n}x{n}, R {m}x{m}, Gamma {n}x{n}"),
            "other",
        ));
    }
    if (costs.rho - data.rho).abs() > T::tol(1e-12) * (T::one() + data.rho.abs()) {
        return Err(Error::InvalidArgument(format!(
            "data were discounted with rho = {}, costs use {}",
            data.rho, costs.rho
        )));
    }
    Ok(())
}

/// Parameters `[colm(P); col(K')]` of one policy-evaluation step.
pub(crate) fn split_theta<T: Real>(
    theta: &[T],
    n: usize,
    m: usize,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let s = n * (n + 1) / 2;
    let p = uncolm(&theta[..s])?.to_matrix();
    let k = uncol(&theta[s..], m, n)?;
    Ok((p, k))
}

/// `Ψ = [δ, −c(I_xx (I⊗KᵀR) + I_xu (I⊗R))]`.
pub(crate) fn design<T: Real>(
    delta: &Matrix<T>,
    i_xx: &Matrix<T>,
    i_xu: &Matrix<T>,
    k: &Matrix<T>,
    r: &Matrix<T>,
    c: T,
) -> Matrix<T> {
    let n = k.cols();
    let eye = Matrix::identity(n);
    let kt_r = &k.transpose() * r;
    let right = &(i_xx * &kron(&eye, &kt_r)) + &(i_xu * &kron(&eye, r));
    Matrix::hstack(delta, &right.scale(-c)).expect("row counts agree")
}

/// Learns `(P₁₁, K₁)` from the error block by iterating
/// `Ψ₁(K) [colm(P); col(K')] = −I_x̃x̃ col(KᵀRK + Q)` from `K₁⁰`.
pub fn opi_feedback<T: Real>(
    data: &RegressionData<T>,
    costs: &CostWeights<T>,
    cfg: &SolverConfig<T>,
) -> Result<IterationHistory<T>> {
    check_costs(data, costs)?;
    let (n, m) = (data.n, data.m);
    if cfg.k1_0.shape() != (m, n) {
        return Err(Error::dims(
            "K1_0",
            format!("{m}x{n}"),
            format!("{:?}", cfg.k1_0.shape()),
        ));
    }
    require(data, Assumption::ErrorExcitation)?;
    let e = &data.error;
    let two = T::lit(2.0);
    iterate_policy(&cfg.k1_0, cfg.rule(), |k| {
        let psi = design(&e.d_colv, &e.i_xx, &e.i_xu, k, &costs.r, two);
        let cost = &(&(&k.transpose() * &costs.r) * k) + &costs.q;
        let xi: Vec<T> = e.i_xx.matvec(&col(&cost)).into_iter().map(|v| -v).collect();
        let fit = least_squares(&psi, &xi, cfg.rank_tol)?;
        split_theta(&fit.theta, n, m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{build_regression_data, SamplingPlan};
    use crate::model::fixtures::example1;
    use crate::numkit::kleinman_solve;
    use crate::population::{exact_expectation_paths, NoiseSpec, TimeGrid};

    #[test]
    fn matches_kleinman_on_smooth_data() {
        let model = example1();
        let k0 = Matrix::from_f64_rows(&[[35.0, 25.0]]).unwrap();
        let pi = vec![NoiseSpec {
            amplitude: 3.0,
            frequencies: vec![1.3, 7.1, 13.0, 29.0],
        }];
        let pj = vec![NoiseSpec {
            amplitude: 2.0,
            frequencies: vec![2.9, 5.3, 17.0, 41.0],
        }];
        let grid = TimeGrid::covering(2.1, 1e-3).unwrap();
        let paths =
            exact_expectation_paths(&model, &k0, (&pi, &pj), std::slice::from_ref(&pi), grid, 4)
                .unwrap();
        let mut plan = SamplingPlan::spanning(0.0, 2.0, 0.1, 0.1).unwrap();
        plan.quadrature = crate::datapipe::Quadrature::Simpson;
        let data = build_regression_data(&paths, &plan, model.rho, false).unwrap();
        let costs = CostWeights::from_model(&model);
        let h = opi_feedback(&data, &costs, &SolverConfig::new(k0.clone())).unwrap();
        assert!(h.converged);
        let truth = kleinman_solve(
            &model.a, &model.b, &model.q, &model.r, model.rho, &k0, 1e-12, 50,
        )
        .unwrap();
        let err =
            (&h.last().k - &truth.last().k).frobenius_norm() / truth.last().k.frobenius_norm();
        assert!(err < 1e-4, "relative gain error {err}");
    }

    #[test]
    fn rejects_mismatched_discount() {
        let model = example1();
        let grid = TimeGrid::covering(1.0, 0.01).unwrap();
        let k0 = Matrix::from_f64_rows(&[[35.0, 25.0]]).unwrap();
        let p = vec![NoiseSpec {
            amplitude: 1.0,
            frequencies: vec![3.0],
        }];
        let q = vec![NoiseSpec {
            amplitude: 1.0,
            frequencies: vec![5.0],
        }];
        let paths =
            exact_expectation_paths(&model, &k0, (&p, &q), std::slice::from_ref(&p), grid, 1)
                .unwrap();
        let data = build_regression_data(&paths, &SamplingPlan::new(0.0, 5, 0.1, 0.1), 0.5, false)
            .unwrap();
        let e = opi_feedback(
            &data,
            &CostWeights::from_model(&model),
            &SolverConfig::new(k0),
        )
        .unwrap_err();
        assert!(matches!(e, Error::InvalidArgument(_)));
    }
}
