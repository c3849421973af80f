//! Sylvester and Lyapunov equations by Kronecker vectorization.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `f X + X g + h = 0` for square `f`, `g`, `h` of equal size.
///
/// Column stacking turns the equation into
/// `(I ⊗ f + gᵀ ⊗ I) col(X) = −col(h)`, solved by LU.
pub fn solve_sylvester<T: Real>(f: &Matrix<T>, g: &Matrix<T>, h: &Matrix<T>) -> Result<Matrix<T>> {
    let n = f.rows();
    for (ctx, m) in [("sylvester f", f), ("sylvester g", g), ("sylvester h", h)] {
        if m.shape() != (n, n) {
            return Err(Error::dims(
                ctx,
                format!("{n}x{n}"),
                format!("{:?}", m.shape()),
            ));
        }
    }
    let nn = n * n;
    // col index of X(i, j) is j*n + i
    let mut big = Matrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += f[(i, k)];
                big[(row, k * n + i)] += g[(k, j)];
            }
        }
    }
    let rhs: Vec<T> = (0..nn).map(|r| -h[(r % n, r / n)]).collect();
    let lu = big.lu().map_err(|_| Error::SingularPencil)?;
    let (lo, hi) = lu.pivot_range();
    if !(lo > T::epsilon() * T::lit(nn as f64) * hi) {
        return Err(Error::SingularPencil);
    }
    let x = lu.solve_vec(&rhs);
    Ok(Matrix::from_fn(n, n, |i, j| x[j * n + i]))
}

/// Solves `aᵀ P + P a + q = 0`.
pub fn solve_lyapunov<T: Real>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    solve_sylvester(&a.transpose(), a, q)
}
