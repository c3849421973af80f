//! Householder QR, singular values and rank-revealing least squares.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Outcome of a least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub theta: Vec<T>,
    pub residual_norm: T,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: T,
    /// Numerical rank of the column-equilibrated design matrix.
    pub rank: usize,
}

/// Column-major Householder QR of a tall matrix; `r` is `p × p`.
struct HouseholderQr<T> {
    r: Matrix<T>,
    qt_b: Option<Vec<T>>,
}

fn householder_qr<T: Real>(cols: &mut [Vec<T>], mut b: Option<&mut Vec<T>>) -> Matrix<T> {
    let p = cols.len();
    let l = cols.first().map_or(0, Vec::len);
    let two = T::lit(2.0);
    for k in 0..p.min(l) {
        let norm = cols[k][k..].iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if cols[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = cols[k][k..].to_vec();
        v[0] -= alpha;
        let vv: T = v.iter().map(|&x| x * x).sum();
        if vv == T::zero() {
            continue;
        }
        for col in cols.iter_mut().skip(k) {
            let s: T = col[k..].iter().zip(&v).map(|(&a, &b)| a * b).sum();
            let f = two * s / vv;
            for (c, &vi) in col[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        if let Some(b) = b.as_deref_mut() {
            let s: T = b[k..].iter().zip(&v).map(|(&a, &b)| a * b).sum();
            let f = two * s / vv;
            for (c, &vi) in b[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }
    Matrix::from_fn(p, p, |i, j| {
        if i <= j && i < l {
            cols[j][i]
        } else {
            T::zero()
        }
    })
}

fn qr<T: Real>(a: &Matrix<T>, b: Option<&[T]>) -> HouseholderQr<T> {
    let mut cols: Vec<Vec<T>> = (0..a.cols()).map(|j| a.column(j)).collect();
    let mut rhs = b.map(<[T]>::to_vec);
    let r = householder_qr(&mut cols, rhs.as_mut());
    HouseholderQr { r, qt_b: rhs }
}

/// One-sided Jacobi singular values of a square or wide-to-square matrix.
fn jacobi_singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let (m, n) = a.shape();
    let mut u: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let eps = T::epsilon();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    alpha += u[p][i] * u[p][i];
                    beta += u[q][i] * u[q][i];
                    gamma += u[p][i] * u[q][i];
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[p][i];
                    let uq = u[q][i];
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = u
        .iter()
        .map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Singular values in descending order.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Vec::new();
    }
    if r < c {
        return singular_values(&a.transpose());
    }
    if r > c {
        jacobi_singular_values(&qr(a, None).r)
    } else {
        jacobi_singular_values(a)
    }
}

/// Largest singular value, `‖a‖₂`.
pub fn spectral_norm<T: Real>(a: &Matrix<T>) -> T {
    singular_values(a).first().copied().unwrap_or_else(T::zero)
}

/// Count of singular values above `rel_tol` times the largest one.
pub fn numerical_rank<T: Real>(m: &Matrix<T>, rel_tol: T) -> usize {
    rank_from_singular_values(&singular_values(m), rel_tol)
}

pub(crate) fn rank_from_singular_values<T: Real>(sv: &[T], rel_tol: T) -> usize {
    match sv.first() {
        Some(&max) if max > T::zero() => sv.iter().filter(|&&s| s > rel_tol * max).count(),
        _ => 0,
    }
}

/// Scales every column to unit Euclidean norm; zero columns keep scale one.
pub(crate) fn equilibrate_columns<T: Real>(a: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let scales: Vec<T> = (0..a.cols())
        .map(|j| {
            let n = (0..a.rows())
                .map(|i| a[(i, j)] * a[(i, j)])
                .sum::<T>()
                .sqrt();
            if n > T::zero() {
                T::one() / n
            } else {
                T::one()
            }
        })
        .collect();
    let scaled = Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] * scales[j]);
    (scaled, scales)
}

/// Minimizes `‖psi θ − xi‖₂` through an orthogonal factorization of the
/// column-equilibrated design matrix.
///
/// Fails with [`Error::RankDeficient`] when the equilibrated matrix has
/// numerical rank below its column count.
pub fn least_squares<T: Real>(psi: &Matrix<T>, xi: &[T], rel_tol: T) -> Result<LeastSquares<T>> {
    let (l, p) = psi.shape();
    if xi.len() != l {
        return Err(Error::dims("least_squares rhs", l, xi.len()));
    }
    if l < p {
        return Err(Error::RankDeficient {
            context: format!("least squares with {l} rows for {p} unknowns"),
            rank: l,
            required: p,
        });
    }
    let (scaled, scales) = equilibrate_columns(psi);
    let f = qr(&scaled, Some(xi));
    let sv = jacobi_singular_values(&f.r);
    let rank = rank_from_singular_values(&sv, rel_tol);
    if rank < p {
        return Err(Error::RankDeficient {
            context: "least squares design matrix".into(),
            rank,
            required: p,
        });
    }
    let qtb = f.qt_b.expect("rhs transformed");
    let mut z = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = qtb[i];
        for j in (i + 1)..p {
            s -= f.r[(i, j)] * z[j];
        }
        z[i] = s / f.r[(i, i)];
    }
    let theta: Vec<T> = z.iter().zip(&scales).map(|(&zi, &s)| zi * s).collect();
    let fitted = psi.matvec(&theta);
    let residual_norm = fitted
        .iter()
        .zip(xi)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt();
    let raw_r = Matrix::from_fn(p, p, |i, j| f.r[(i, j)] / scales[j]);
    let raw_sv = jacobi_singular_values(&raw_r);
    let condition = match (raw_sv.first(), raw_sv.last()) {
        (Some(&hi), Some(&lo)) if lo > T::zero() => hi / lo,
        _ => T::infinity(),
    };
    Ok(LeastSquares {
        theta,
        residual_norm,
        condition,
        rank,
    })
}
