//! Problem constants of the linear-quadratic-Gaussian mean-field game.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::eigen::eigenvalues;
use crate::numkit::Matrix;
use crate::scalar::Real;

/// Agent dynamics `dx = (A x + G x_(N) + B u) dt + D dw`, cost weights
/// `Q`, `R`, `Γ`, discount `ρ` and the initial-state distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct LqgGameModel<T> {
    #[serde(rename = "A")]
    pub a: Matrix<T>,
    #[serde(rename = "B")]
    pub b: Matrix<T>,
    #[serde(rename = "G")]
    pub g: Matrix<T>,
    #[serde(rename = "D")]
    pub d: Matrix<T>,
    #[serde(rename = "Q")]
    pub q: Matrix<T>,
    #[serde(rename = "R")]
    pub r: Matrix<T>,
    #[serde(rename = "Gamma")]
    pub gamma: Matrix<T>,
    pub rho: T,
    /// Mean of the initial state distribution.
    pub init_mean: Vec<T>,
    /// Per-coordinate `[lo, hi]` of the uniform initial distribution.
    pub init_box: Vec<[T; 2]>,
}

impl<T: Real> LqgGameModel<T> {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    /// Columns of `D`, the Brownian dimension.
    pub fn noise_dim(&self) -> usize {
        self.d.cols()
    }

    /// `B R⁻¹ Bᵀ`.
    pub fn s_matrix(&self) -> Result<Matrix<T>> {
        let rinv_bt = self.r.solve(&self.b.transpose())?;
        Ok(&self.b * &rinv_bt)
    }

    pub fn a_plus_g(&self) -> Matrix<T> {
        &self.a + &self.g
    }

    /// Checks dimensions, finiteness, `R ≻ 0`, `Q ⪰ 0` and `ρ > 0`.
    ///
    /// Errors carry the offending field name.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let m = self.m();
        let bad = |field: &str, why: String| Err(Error::InvalidArgument(format!("{field}: {why}")));
        let shape = |x: &Matrix<T>| format!("{}x{}", x.rows(), x.cols());
        if n == 0 || !self.a.is_square() {
            return bad(
                "A",
                format!("must be square and non-empty, got {}", shape(&self.a)),
            );
        }
        if self.b.rows() != n || m == 0 {
            return bad(
                "B",
                format!("must be {n}xm with m >= 1, got {}", shape(&self.b)),
            );
        }
        for (name, mat) in [("G", &self.g), ("Q", &self.q), ("Gamma", &self.gamma)] {
            if mat.shape() != (n, n) {
                return bad(name, format!("must be {n}x{n}, got {}", shape(mat)));
            }
        }
        if self.d.rows() != n {
            return bad("D", format!("must have {n} rows, got {}", shape(&self.d)));
        }
        if self.r.shape() != (m, m) {
            return bad("R", format!("must be {m}x{m}, got {}", shape(&self.r)));
        }
        for (name, mat) in [
            ("A", &self.a),
            ("B", &self.b),
            ("G", &self.g),
            ("D", &self.d),
            ("Q", &self.q),
            ("R", &self.r),
            ("Gamma", &self.gamma),
        ] {
            if !mat.is_finite() {
                return bad(name, "entries must be finite".into());
            }
        }
        if !(self.rho > T::zero() && self.rho.is_finite()) {
            return bad("rho", format!("must be positive, got {}", self.rho));
        }
        let sym_tol = |x: &Matrix<T>| T::tol(1e-12) * (T::one() + x.max_abs());
        if !self.r.is_symmetric(sym_tol(&self.r)) || !is_positive_definite(&self.r) {
            return bad("R", "must be symmetric positive definite".into());
        }
        if !self.q.is_symmetric(sym_tol(&self.q)) {
            return bad("Q", "must be symmetric".into());
        }
        let qmin = eigenvalues(&self.q.symmetrize())?
            .iter()
            .map(|z| z.re)
            .fold(T::infinity(), T::min);
        if qmin < -T::tol(1e-10) * (T::one() + self.q.max_abs()) {
            return bad(
                "Q",
                format!("must be positive semidefinite, smallest eigenvalue {qmin}"),
            );
        }
        if self.init_mean.len() != n || self.init_mean.iter().any(|v| !v.is_finite()) {
            return bad("init_mean", format!("must have {n} finite entries"));
        }
        if self.init_box.len() != n {
            return bad(
                "init_box",
                format!("must have {n} ranges, got {}", self.init_box.len()),
            );
        }
        if let Some(i) = self
            .init_box
            .iter()
            .position(|[lo, hi]| !(lo <= hi) || !hi.is_finite())
        {
            return bad("init_box", format!("range {i} must satisfy lo <= hi"));
        }
        Ok(())
    }
}

/// Cholesky attempt on the symmetric part.
pub(crate) fn is_positive_definite<T: Real>(m: &Matrix<T>) -> bool {
    let n = m.rows();
    let a = m.symmetrize();
    let mut l = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    true
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn scalar(
        a: f64,
        b: f64,
        g: f64,
        q: f64,
        r: f64,
        gamma: f64,
        rho: f64,
    ) -> LqgGameModel<f64> {
        let s = |v: f64| Matrix::<f64>::from_f64_rows(&[[v]]).unwrap();
        LqgGameModel {
            a: s(a),
            b: s(b),
            g: s(g),
            d: s(0.0),
            q: s(q),
            r: s(r),
            gamma: s(gamma),
            rho,
            init_mean: vec![0.0],
            init_box: vec![[0.0, 0.0]],
        }
    }

    pub use crate::fixtures::example1;
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn example_model_is_valid() {
        example1().validate().unwrap();
        assert_eq!(example1().s_matrix().unwrap()[(1, 1)], 100.0);
    }

    #[test]
    fn validation_names_the_field() {
        let mut m = example1();
        m.r = Matrix::<f64>::from_f64_rows(&[[-1.0]]).unwrap();
        let e = m.validate().unwrap_err().to_string();
        assert!(e.contains("R:"), "{e}");
        let mut m = example1();
        m.q = Matrix::diagonal(&[1.0, -1.0]);
        assert!(m.validate().unwrap_err().to_string().contains("Q:"));
        let mut m = example1();
        m.rho = 0.0;
        assert!(m.validate().unwrap_err().to_string().contains("rho"));
        let mut m = example1();
        m.g = Matrix::identity(3);
        assert!(m.validate().unwrap_err().to_string().contains("G:"));
        let mut m = example1();
        m.init_box[1] = [3.0, -1.0];
        assert!(m.validate().unwrap_err().to_string().contains("init_box"));
    }

    #[test]
    fn positive_definite_check() {
        assert!(is_positive_definite(&Matrix::<f64>::identity(3)));
        assert!(!is_positive_definite(
            &Matrix::<f64>::from_f64_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap()
        ));
    }
}
