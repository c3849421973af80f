//! System identification from learned Riccati pairs and trajectory data.

use serde::{Deserialize, Serialize};

use crate::datapipe::{require, Assumption, RegressionData};
use crate::error::{Error, Result};
use crate::numkit::{least_squares, Matrix};
use crate::scalar::Real;

/// Identified drift and input matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct IdentifiedModel<T> {
    #[serde(rename = "A")]
    pub a: Matrix<T>,
    #[serde(rename = "B")]
    pub b: Matrix<T>,
    #[serde(rename = "A_plus_G")]
    pub a_plus_g: Matrix<T>,
}

impl<T: Real> IdentifiedModel<T> {
    pub fn g(&self) -> Matrix<T> {
        &self.a_plus_g - &self.a
    }
}

/// `B = P₁₁⁻¹ K₁ᵀ R`, from `K₁ = R⁻¹BᵀP₁₁`.
pub fn recover_b<T: Real>(p11: &Matrix<T>, k1: &Matrix<T>, r: &Matrix<T>) -> Result<Matrix<T>> {
    let n = p11.rows();
    let m = r.rows();
    if p11.shape() != (n, n) || k1.shape() != (m, n) || r.shape() != (m, m) {
        return Err(Error::dims(
            "recover_b",
            format!("P {n}x{n}, K {m}x{n}, R {m}x{m}"),
            "other",
        ));
    }
    p11.solve(&(&k1.transpose() * r))
        .map_err(|e| e.in_stage("recover B"))
}

/// Row `i` of the drift from
/// `2 I_xx (eᵢ ⊗ I) κ = (δ_xx + ρ I_xx) col(EᵢᵢQ) − 2 I_xu (eᵢ ⊗ I) Bᵀeᵢ`.
#[allow(clippy::too_many_arguments)]
fn identify_rows<T: Real>(
    d_xx: &Matrix<T>,
    i_xx: &Matrix<T>,
    i_xu: &Matrix<T>,
    b: &Matrix<T>,
    rho: T,
    n: usize,
    m: usize,
    rank_tol: T,
) -> Result<Matrix<T>> {
    if b.shape() != (n, m) {
        return Err(Error::dims(
            "identify B",
            format!("{n}x{m}"),
            format!("{:?}", b.shape()),
        ));
    }
    let two = T::lit(2.0);
    let rows = i_xx.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let psi = Matrix::from_fn(rows, n, |k, j| two * i_xx[(k, i * n + j)]);
        let xi: Vec<T> = (0..rows)
            .map(|k| {
                let diag = i * n + i;
                let mut v = d_xx[(k, diag)] + rho * i_xx[(k, diag)];
                for c in 0..m {
                    v -= two * i_xu[(k, i * m + c)] * b[(i, c)];
                }
                v
            })
            .collect();
        let fit = least_squares(&psi, &xi, rank_tol)?;
        for j in 0..n {
            out[(i, j)] = fit.theta[j];
        }
    }
    Ok(out)
}

/// `Â` from the error block.
pub fn identify_a<T: Real>(
    data: &RegressionData<T>,
    b_hat: &Matrix<T>,
    rank_tol: T,
) -> Result<Matrix<T>> {
    require(data, Assumption::ErrorExcitation)?;
    let e = &data.error;
    identify_rows(
        &e.d_xx, &e.i_xx, &e.i_xu, b_hat, data.rho, data.n, data.m, rank_tol,
    )
}

/// `(A + G)^` from the average block.
pub fn identify_a_plus_g<T: Real>(
    data: &RegressionData<T>,
    b_hat: &Matrix<T>,
    rank_tol: T,
) -> Result<Matrix<T>> {
    require(data, Assumption::AverageExcitation)?;
    let a = &data.average;
    identify_rows(
        &a.d_xx, &a.i_xx, &a.i_xu, b_hat, data.rho, data.n, data.m, rank_tol,
    )
}
