//! Kronecker products and the vectorizations `col`, `colm` and `colv`.
//!
//! `col` stacks columns. For symmetric `P` and any `x`,
//! `colv(x) · colm(P) = xᵀ P x`, which halves the unknown count of every
//! quadratic-form regression.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn kron<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Kronecker product of two vectors: `(x ⊗ y)[i*len(y) + j] = x[i] y[j]`.
pub fn kron_vec<T: Real>(x: &[T], y: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for &xi in x {
        out.extend(y.iter().map(|&yj| xi * yj));
    }
    out
}

/// Column stacking.
pub fn col<T: Real>(a: &Matrix<T>) -> Vec<T> {
    let (r, c) = a.shape();
    let mut v = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            v.push(a[(i, j)]);
        }
    }
    v
}

pub fn uncol<T: Real>(v: &[T], rows: usize, cols: usize) -> Result<Matrix<T>> {
    if v.len() != rows * cols {
        return Err(Error::dims("uncol", rows * cols, v.len()));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| v[j * rows + i]))
}

/// `[p11, 2p12, .., 2p1n, p22, 2p23, .., pnn]`.
pub fn colm<T: Real>(p: &SymMatrix<T>) -> Vec<T> {
    let n = p.dim();
    let two = T::lit(2.0);
    let mut v = Vec::with_capacity(SymMatrix::<T>::packed_len(n));
    for i in 0..n {
        for j in i..n {
            let x = p.get(i, j);
            v.push(if i == j { x } else { two * x });
        }
    }
    v
}

pub fn uncolm<T: Real>(v: &[T]) -> Result<SymMatrix<T>> {
    let n = dim_from_packed_len(v.len())
        .ok_or_else(|| Error::dims("uncolm", "triangular length n(n+1)/2", v.len()))?;
    let half = T::lit(0.5);
    let mut packed = Vec::with_capacity(v.len());
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            packed.push(if i == j { v[k] } else { half * v[k] });
            k += 1;
        }
    }
    SymMatrix::from_packed(n, packed)
}

/// `[x1², x1x2, .., x1xn, x2², .., xn²]`.
pub fn colv<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push(x[i] * x[j]);
        }
    }
    v
}

/// Keeps the upper-triangular entries `(i, j)`, `i <= j`, of a length-`n²`
/// vector laid out as `v[i*n + j]`.
///
/// Applied to `x ⊗ x` this yields `colv(x)`; applied to a symmetrized
/// outer product `w` it satisfies `compress(w) · colm(P) = w · col(P)` for
/// symmetric `P`.
pub fn compress_upper<T: Real>(v: &[T], n: usize) -> Vec<T> {
    debug_assert_eq!(v.len(), n * n);
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.extend_from_slice(&v[i * n + i..(i + 1) * n]);
    }
    out
}

/// Applies [`compress_upper`] to every row of an `l × n²` matrix.
pub fn compress_rows<T: Real>(m: &Matrix<T>, n: usize) -> Matrix<T> {
    let s = n * (n + 1) / 2;
    let mut out = Matrix::zeros(m.rows(), s);
    for r in 0..m.rows() {
        let c = compress_upper(m.row(r), n);
        out.as_mut_slice()[r * s..(r + 1) * s].copy_from_slice(&c);
    }
    out
}

pub fn dim_from_packed_len(len: usize) -> Option<usize> {
    let mut n = 0;
    while n * (n + 1) / 2 < len {
        n += 1;
    }
    (n * (n + 1) / 2 == len).then_some(n)
}
