//! Eigenvalues of small dense real matrices.
//!
//! Balancing, Householder reduction to upper Hessenberg form and the
//! Francis double-shift QR iteration. Eigenvectors come from complex
//! inverse iteration on the original matrix.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real parts must lie this far below the shift to count as stable.
pub const HURWITZ_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport<T> {
    /// `(re, im)` pairs.
    pub eigenvalues: Vec<(T, T)>,
    /// Largest real part.
    pub stability_margin: T,
    pub shift: T,
    /// `stability_margin < shift - HURWITZ_MARGIN`.
    pub hurwitz: bool,
}

pub fn spectral<T: Real>(m: &Matrix<T>, shift: T) -> Result<SpectralReport<T>> {
    let eig = eigenvalues(m)?;
    let stability_margin = eig.iter().map(|z| z.re).fold(T::neg_infinity(), T::max);
    Ok(SpectralReport {
        eigenvalues: eig.iter().map(|z| (z.re, z.im)).collect(),
        stability_margin,
        shift,
        hurwitz: stability_margin < shift - T::tol(HURWITZ_MARGIN),
    })
}

/// Eigenvalues, complex pairs adjacent with positive imaginary part first.
pub fn eigenvalues<T: Real>(m: &Matrix<T>) -> Result<Vec<Complex<T>>> {
    if !m.is_square() {
        return Err(Error::dims(
            "eigenvalues",
            "square matrix",
            format!("{:?}", m.shape()),
        ));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument(
            "eigenvalues of a non-finite matrix".into(),
        ));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    balance(&mut a);
    hessenberg(&mut a);
    hqr(a)
}

/// Similarity scaling by powers of two that equalizes row and column norms.
fn balance<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::lit(2.0);
    let sqrdx = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::lit(0.95) * s {
                    done = false;
                    let g = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg<T: Real>(a: &mut Matrix<T>) {
    let n = a.rows();
    let two = T::lit(2.0);
    for k in 0..n.saturating_sub(2) {
        let norm = ((k + 1)..n)
            .map(|i| a[(i, k)] * a[(i, k)])
            .sum::<T>()
            .sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if a[(k + 1, k)] > T::zero() {
            -norm
        } else {
            norm
        };
        let mut v: Vec<T> = ((k + 1)..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vv: T = v.iter().map(|&x| x * x).sum();
        if vv == T::zero() {
            continue;
        }
        // A <- H A
        for j in 0..n {
            let s: T = v
                .iter()
                .enumerate()
                .map(|(r, &vi)| vi * a[(k + 1 + r, j)])
                .sum();
            let f = two * s / vv;
            for (r, &vi) in v.iter().enumerate() {
                a[(k + 1 + r, j)] -= f * vi;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: T = v
                .iter()
                .enumerate()
                .map(|(r, &vi)| vi * a[(i, k + 1 + r)])
                .sum();
            let f = two * s / vv;
            for (r, &vi) in v.iter().enumerate() {
                a[(i, k + 1 + r)] -= f * vi;
            }
        }
        for i in (k + 2)..n {
            a[(i, k)] = T::zero();
        }
    }
}

fn sign<T: Real>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (1-based internally).
fn hqr<T: Real>(h: Matrix<T>) -> Result<Vec<Complex<T>>> {
    let n = h.rows();
    let mut a = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let mut wr = vec![T::zero(); n + 1];
    let mut wi = vec![T::zero(); n + 1];
    let mut anorm = T::zero();
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let (c075, c04375, half) = (T::lit(0.75), T::lit(0.4375), T::lit(0.5));
    let mut nn = n;
    let mut t = T::zero();
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == T::zero() {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = T::zero();
                    break;
                }
                l -= 1;
            }
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = T::zero();
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                let p = half * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= T::zero() {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != T::zero() {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = T::zero();
                    wi[nn] = T::zero();
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                nn = nn.saturating_sub(2);
                break;
            }
            if its == 60 {
                return Err(Error::InvalidArgument(
                    "QR iteration failed to converge".into(),
                ));
            }
            if its == 10 || its == 20 || its == 40 {
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = c075 * s;
                y = x;
                w = -c04375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = T::zero();
                if i != m + 2 {
                    a[i][i - 3] = T::zero();
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = T::zero();
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != T::zero() {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((1..=n).map(|i| Complex::new(wr[i], wi[i])).collect())
}

/// Unit-norm eigenvector for an (approximate) eigenvalue `lambda` by
/// inverse iteration in complex arithmetic.
pub fn eigenvector<T: Real>(m: &Matrix<T>, lambda: Complex<T>) -> Result<Vec<Complex<T>>> {
    let n = m.rows();
    let scale = m.norm_inf().max(T::one());
    let tiny = T::epsilon() * scale;
    let mu = lambda + Complex::new(T::lit(64.0) * tiny, T::zero());
    let mut a: Vec<Vec<Complex<T>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex::new(m[(i, j)], T::zero());
                    if i == j {
                        v - mu
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let perm = complex_lu(&mut a, tiny);
    let inv_sqrt_n = T::one() / T::lit(n as f64).sqrt();
    let mut v: Vec<Complex<T>> = (0..n)
        .map(|i| Complex::new(inv_sqrt_n, T::lit(0.1 * (i as f64 + 1.0)) * inv_sqrt_n))
        .collect();
    for _ in 0..4 {
        let mut y = complex_lu_solve(&a, &perm, &v);
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm.is_finite() && norm > T::zero()) {
            return Err(Error::Singular {
                context: "inverse iteration",
            });
        }
        for z in &mut y {
            *z /= norm;
        }
        v = y;
    }
    // fix the phase so the largest component is real and positive
    let (imax, _) = v.iter().enumerate().fold((0, T::zero()), |acc, (i, z)| {
        if z.norm() > acc.1 {
            (i, z.norm())
        } else {
            acc
        }
    });
    let phase = v[imax].conj() / v[imax].norm();
    Ok(v.into_iter().map(|z| z * phase).collect())
}

fn complex_lu<T: Real>(a: &mut [Vec<Complex<T>>], tiny: T) -> Vec<usize> {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| {
                a[i][k]
                    .norm()
                    .partial_cmp(&a[j][k].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(k);
        if p != k {
            a.swap(k, p);
            perm.swap(k, p);
        }
        if a[k][k].norm() <= tiny {
            a[k][k] = Complex::new(tiny, T::zero());
        }
        let pivot = a[k][k];
        for i in (k + 1)..n {
            let f = a[i][k] / pivot;
            a[i][k] = f;
            for j in (k + 1)..n {
                let v = a[k][j];
                a[i][j] -= f * v;
            }
        }
    }
    perm
}

fn complex_lu_solve<T: Real>(
    a: &[Vec<Complex<T>>],
    perm: &[usize],
    b: &[Complex<T>],
) -> Vec<Complex<T>> {
    let n = a.len();
    let mut x: Vec<Complex<T>> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for j in 0..i {
            let v = a[i][j] * x[j];
            x[i] -= v;
        }
    }
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let v = a[i][j] * x[j];
            x[i] -= v;
        }
        x[i] /= a[i][i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn negative_identity_is_hurwitz() {
        let r = spectral(&(-&Matrix::<f64>::identity(2)), 0.0).unwrap();
        assert!(r.hurwitz);
        assert_eq!(r.stability_margin, -1.0);
        assert_eq!(r.eigenvalues.len(), 2);
    }

    #[test]
    fn rotation_is_not_hurwitz() {
        let m = Matrix::<f64>::from_f64_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let r = spectral(&m, 0.0).unwrap();
        assert!(!r.hurwitz);
        assert!(r.stability_margin.abs() < 1e-14);
        let e = sorted(eigenvalues(&m).unwrap());
        assert!((e[0].im + 1.0).abs() < 1e-14 && (e[1].im - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_and_companion_spectra() {
        let t =
            Matrix::<f64>::from_f64_rows(&[[1.0, 5.0, -2.0], [0.0, -3.0, 4.0], [0.0, 0.0, 2.5]])
                .unwrap();
        let e = sorted(eigenvalues(&t).unwrap());
        for (z, want) in e.iter().zip([-3.0, 1.0, 2.5]) {
            assert!((z.re - want).abs() < 1e-12 && z.im.abs() < 1e-12);
        }
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let c = Matrix::<f64>::from_f64_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let e = sorted(eigenvalues(&c).unwrap());
        for (z, want) in e.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((z.re - want).abs() < 1e-9, "{z} vs {want}");
        }
    }

    #[test]
    fn random_matrices_satisfy_trace_and_eigen_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0f64));
            let e = eigenvalues(&m).unwrap();
            let tr: f64 = e.iter().map(|z| z.re).sum();
            assert!((tr - m.trace()).abs() < 1e-10);
            for &lam in &e {
                let v = eigenvector(&m, lam).unwrap();
                let mut res = 0.0;
                for i in 0..n {
                    let mut s = Complex::new(0.0, 0.0);
                    for j in 0..n {
                        s += v[j] * m[(i, j)];
                    }
                    res += (s - lam * v[i]).norm_sqr();
                }
                assert!(res.sqrt() < 1e-8, "n={n} residual {}", res.sqrt());
            }
        }
    }

    #[test]
    fn single_precision_eigenvalues() {
        let m: Matrix<f32> = Matrix::<f32>::from_f64_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let mut e: Vec<f32> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-5 && (e[1] - 3.0).abs() < 1e-5);
    }
}
