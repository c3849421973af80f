//! Matrix exponential by scaling and squaring with a diagonal Padé approximant.

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const PADE_ORDER: usize = 6;

pub fn expm<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::dims(
            "expm",
            "square matrix",
            format!("{:?}", a.shape()),
        ));
    }
    let n = a.rows();
    let norm = a.norm_inf();
    let mut s = 0i32;
    if norm > T::lit(0.5) {
        s = (norm / T::lit(0.5))
            .log2()
            .ceil()
            .to_i32()
            .unwrap_or(0)
            .max(0);
    }
    let scaled = a.scale(T::lit(2f64.powi(-s)));
    // Padé coefficients c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
    let q = PADE_ORDER;
    let mut c = T::one();
    let ident = Matrix::identity(n);
    let mut x = ident.clone();
    let mut num = ident.clone();
    let mut den = ident.clone();
    let mut positive = true;
    for k in 1..=q {
        c = c * T::lit((q - k + 1) as f64) / T::lit((k * (2 * q - k + 1)) as f64);
        x = &scaled * &x;
        let term = x.scale(c);
        num = &num + &term;
        den = if positive { &den - &term } else { &den + &term };
        positive = !positive;
    }
    let mut e = den.solve(&num).map_err(|_| Error::Singular {
        context: "expm Padé denominator",
    })?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}
