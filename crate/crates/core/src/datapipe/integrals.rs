//! Discounted Kronecker differences and integrals over a window.

use super::plan::Quadrature;
use crate::error::{Error, Result};
use crate::numkit::kron_vec;
use crate::population::Path;
use crate::scalar::Real;

/// Grid indices of a window: nodes `i0, i0 + stride, .., i0 + steps·stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct WindowNodes {
    pub i0: usize,
    pub stride: usize,
    pub steps: usize,
}

fn out_of_range<T: Real>(path: &Path<T>, t: T, window: T) -> Error {
    Error::WindowOutOfRange {
        start: t.as_f64(),
        end: (t + window).as_f64(),
        domain_start: path.grid.t0.as_f64(),
        domain_end: path.grid.end().as_f64(),
    }
}

fn integer_ratio<T: Real>(num: T, den: T, what: &str) -> Result<usize> {
    let x = num / den;
    let k = x.round();
    if k < T::one() || (x - k).abs() > T::lit(1e-6) * k {
        return Err(Error::GridMismatch(format!(
            "{what}: {num} is not a positive multiple of {den}"
        )));
    }
    k.to_usize()
        .ok_or_else(|| Error::GridMismatch(format!("{what}: ratio overflow")))
}

pub(crate) fn window_nodes<T: Real>(
    path: &Path<T>,
    t: T,
    window: T,
    substep: Option<T>,
) -> Result<WindowNodes> {
    let g = path.grid;
    let tol = T::lit(1e-6) * g.dt;
    if t < g.t0 - tol || t + window > g.end() + tol {
        return Err(out_of_range(path, t, window));
    }
    let i0 = g
        .index_of(t)
        .ok_or_else(|| Error::GridMismatch(format!("window start {t} is not a grid instant")))?;
    let h = substep.unwrap_or(g.dt);
    let stride = integer_ratio(h, g.dt, "quadrature substep")?;
    let steps = integer_ratio(window, h, "window")?;
    if i0 + steps * stride >= g.len {
        return Err(out_of_range(path, t, window));
    }
    Ok(WindowNodes { i0, stride, steps })
}

fn check_pair<T: Real>(x: &Path<T>, y: &Path<T>) -> Result<()> {
    if !x.grid.matches(&y.grid) {
        return Err(Error::GridMismatch(
            "paths of an outer product must share a grid".into(),
        ));
    }
    Ok(())
}

/// Quadrature weights for `steps` intervals of width `h`.
pub(crate) fn weights<T: Real>(rule: Quadrature, steps: usize, h: T) -> Result<Vec<T>> {
    let mut w = vec![T::zero(); steps + 1];
    match rule {
        Quadrature::Rectangle | Quadrature::ProductRule => {
            w[..steps].iter_mut().for_each(|v| *v = h);
        }
        Quadrature::Trapezoid => {
            w.iter_mut().for_each(|v| *v = h);
            w[0] = h / T::lit(2.0);
            w[steps] = h / T::lit(2.0);
        }
        Quadrature::Simpson => {
            if !steps.is_multiple_of(2) {
                return Err(Error::InvalidArgument(format!(
                    "Simpson's rule needs an even interval count per window, got {steps}"
                )));
            }
            let third = h / T::lit(3.0);
            for (k, v) in w.iter_mut().enumerate() {
                *v = if k == 0 || k == steps {
                    third
                } else if k % 2 == 1 {
                    T::lit(4.0) * third
                } else {
                    T::lit(2.0) * third
                };
            }
        }
    }
    Ok(w)
}

pub(crate) fn integral_at<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    nodes: WindowNodes,
    w: &[T],
    rho: T,
    out: &mut [T],
) {
    let (dx, dy) = (x.dim, y.dim);
    out.iter_mut().for_each(|v| *v = T::zero());
    for (k, &wk) in w.iter().enumerate() {
        if wk == T::zero() {
            continue;
        }
        let idx = nodes.i0 + k * nodes.stride;
        let c = wk * (-rho * x.grid.time(idx)).exp();
        let (xs, ys) = (x.at(idx), y.at(idx));
        for i in 0..dx {
            let ci = c * xs[i];
            for j in 0..dy {
                out[i * dy + j] += ci * ys[j];
            }
        }
    }
}

/// `∫ₜ^{t+T} e^{−ρτ} x(τ) ⊗ y(τ) dτ` by `rule` on nodes spaced `substep`
/// (the path step when `None`).
pub fn discounted_outer_integral<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    t: T,
    window: T,
    rho: T,
    rule: Quadrature,
    substep: Option<T>,
) -> Result<Vec<T>> {
    check_pair(x, y)?;
    let nodes = window_nodes(x, t, window, substep)?;
    let h = x.grid.dt * T::lit(nodes.stride as f64);
    let w = weights(rule, nodes.steps, h)?;
    let mut out = vec![T::zero(); x.dim * y.dim];
    integral_at(x, y, nodes, &w, rho, &mut out);
    Ok(out)
}

pub(crate) fn difference_at<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    a: usize,
    b: usize,
    rho: T,
    symmetrized: bool,
) -> Vec<T> {
    let ea = (-rho * x.grid.time(a)).exp();
    let eb = (-rho * x.grid.time(b)).exp();
    let fa = kron_vec(x.at(a), y.at(a));
    let fb = kron_vec(x.at(b), y.at(b));
    let mut d: Vec<T> = fb.iter().zip(&fa).map(|(&u, &v)| eb * u - ea * v).collect();
    if symmetrized {
        let ga = kron_vec(y.at(a), x.at(a));
        let gb = kron_vec(y.at(b), x.at(b));
        let half = T::lit(0.5);
        for (k, v) in d.iter_mut().enumerate() {
            *v = half * (*v + eb * gb[k] - ea * ga[k]);
        }
    }
    d
}

/// Subtracts `Σₖ e^{−ρt_{k+1}} Δxₖ ⊗ Δyₖ` over consecutive window nodes from `d`.
pub(crate) fn remove_increments<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    nodes: WindowNodes,
    rho: T,
    symmetrized: bool,
    d: &mut [T],
) {
    let (dx, dy) = (x.dim, y.dim);
    let mut ex = vec![T::zero(); dx];
    let mut ey = vec![T::zero(); dy];
    let c0 = if symmetrized { T::lit(0.5) } else { T::one() };
    for k in 0..nodes.steps {
        let (a, b) = (
            nodes.i0 + k * nodes.stride,
            nodes.i0 + (k + 1) * nodes.stride,
        );
        let c = c0 * (-rho * x.grid.time(b)).exp();
        for (e, (&u, &v)) in ex.iter_mut().zip(x.at(b).iter().zip(x.at(a))) {
            *e = u - v;
        }
        for (e, (&u, &v)) in ey.iter_mut().zip(y.at(b).iter().zip(y.at(a))) {
            *e = u - v;
        }
        for i in 0..dx {
            for j in 0..dy {
                d[i * dy + j] -= c * ex[i] * ey[j];
                if symmetrized {
                    d[i * dy + j] -= c * ey[i] * ex[j];
                }
            }
        }
    }
}

/// `e^{−ρ(t+T)} x(t+T) ⊗ y(t+T) − e^{−ρt} x(t) ⊗ y(t)`; `symmetrized` takes
/// the half-sum with the `y ⊗ x` ordering (square outer products only).
pub fn discounted_outer_difference<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    t: T,
    window: T,
    rho: T,
    symmetrized: bool,
) -> Result<Vec<T>> {
    check_pair(x, y)?;
    if symmetrized && x.dim != y.dim {
        return Err(Error::dims("symmetrized difference", x.dim, y.dim));
    }
    let nodes = window_nodes(x, t, window, None)?;
    Ok(difference_at(
        x,
        y,
        nodes.i0,
        nodes.i0 + nodes.steps,
        rho,
        symmetrized,
    ))
}

/// [`discounted_outer_difference`] less the discounted increment products on
/// nodes spaced `substep`, the difference paired with [`Quadrature::ProductRule`].
pub fn corrected_outer_difference<T: Real>(
    x: &Path<T>,
    y: &Path<T>,
    t: T,
    window: T,
    rho: T,
    symmetrized: bool,
    substep: Option<T>,
) -> Result<Vec<T>> {
    let mut d = discounted_outer_difference(x, y, t, window, rho, symmetrized)?;
    let nodes = window_nodes(x, t, window, substep)?;
    remove_increments(x, y, nodes, rho, symmetrized, &mut d);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::TimeGrid;

    fn constant(c: f64, dt: f64, horizon: f64) -> Path<f64> {
        Path::from_fn(TimeGrid::<f64>::covering(horizon, dt).unwrap(), 1, |_| {
            vec![c]
        })
        .unwrap()
    }

    #[test]
    fn constant_paths() {
        let x = constant(3.0, 0.01, 2.0);
        let v =
            discounted_outer_integral(&x, &x, 0.5, 1.0, 0.0, Quadrature::Rectangle, None).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-12);
        let d = discounted_outer_difference(&x, &x, 0.5, 1.0, 0.0, false).unwrap();
        assert_eq!(d, vec![0.0]);
        let rho = 0.5;
        let exact = 9.0 * (1.0 - (-rho * 1.0f64).exp()) / rho;
        let h = 0.01;
        let v =
            discounted_outer_integral(&x, &x, 0.0, 1.0, rho, Quadrature::Rectangle, None).unwrap();
        assert!((v[0] - exact).abs() <= 9.0 * rho * 1.0 * h);
    }

    #[test]
    fn linear_difference_and_exponential_integral() {
        let g = TimeGrid::<f64>::covering(2.0, 1e-3).unwrap();
        let x = Path::from_fn(g, 1, |t: f64| vec![t]).unwrap();
        let one = Path::from_fn(g, 1, |_| vec![1.0]).unwrap();
        let d = discounted_outer_difference(&x, &one, 0.0, 2.0, 0.0, false).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-12);
        let e = Path::from_fn(g, 1, |t: f64| vec![(-t).exp()]).unwrap();
        let exact = (1.0 - (-2f64).exp()) / 2.0;
        for (rule, tol) in [
            (Quadrature::Rectangle, 1e-3),
            (Quadrature::Trapezoid, 1e-6),
            (Quadrature::Simpson, 1e-12),
        ] {
            let v = discounted_outer_integral(&e, &one, 0.0, 1.0, 1.0, rule, None).unwrap();
            assert!((v[0] - exact).abs() < tol, "{rule:?}");
        }
    }

    #[test]
    fn rectangle_rule_is_first_order() {
        let g = TimeGrid::<f64>::covering(1.0, 1.0 / 1024.0).unwrap();
        let x = Path::from_fn(g, 1, |t: f64| vec![(3.0 * t).sin() + 2.0]).unwrap();
        let exact = {
            let fine = Path::from_fn(
                TimeGrid::<f64>::covering(1.0, 1.0 / 65536.0).unwrap(),
                1,
                |t: f64| vec![(3.0 * t).sin() + 2.0],
            )
            .unwrap();
            discounted_outer_integral(&fine, &fine, 0.0, 1.0, 0.7, Quadrature::Simpson, None)
                .unwrap()[0]
        };
        let mut last = f64::INFINITY;
        for k in [16.0, 32.0, 64.0, 128.0] {
            let v = discounted_outer_integral(
                &x,
                &x,
                0.0,
                1.0,
                0.7,
                Quadrature::Rectangle,
                Some(1.0 / k),
            )
            .unwrap();
            let err = (v[0] - exact).abs();
            assert!(last / err >= 1.8, "ratio {}", last / err);
            last = err;
        }
    }

    #[test]
    fn product_rule_is_exact_for_euler_paths() {
        // x_{k+1} = x_k + h(a x_k + b u_k) with a rough input
        let (a, b, h, rho) = (-2.0, 1.5, 1e-2, 0.3);
        let g = TimeGrid::<f64>::covering(1.0, h).unwrap();
        let u: Vec<f64> = (0..g.len).map(|k| (37.0 * k as f64).sin() * 5.0).collect();
        let mut x = vec![1.0];
        for k in 0..g.len - 1 {
            let v = x[k];
            x.push(v + h * (a * v + b * u[k]));
        }
        let xp = Path::from_fn(g, 1, |t: f64| vec![x[g.index_of(t).unwrap()]]).unwrap();
        let up = Path::from_fn(g, 1, |t: f64| vec![u[g.index_of(t).unwrap()]]).unwrap();
        let d = corrected_outer_difference(&xp, &xp, 0.2, 0.5, rho, false, None).unwrap()[0];
        let ixx = discounted_outer_integral(&xp, &xp, 0.2, 0.5, rho, Quadrature::ProductRule, None)
            .unwrap()[0];
        let ixu = discounted_outer_integral(&xp, &up, 0.2, 0.5, rho, Quadrature::ProductRule, None)
            .unwrap()[0];
        let rhs = (2.0 * a - rho) * ixx + 2.0 * b * ixu;
        // residual only from the discount mismatch, of order rho*h
        assert!(
            (d - rhs).abs() < 2.0 * rho * h * ixx.abs().max(1.0),
            "{d} vs {rhs}"
        );
        let plain = discounted_outer_difference(&xp, &xp, 0.2, 0.5, rho, false).unwrap()[0];
        assert!((plain - rhs).abs() > 5.0 * (d - rhs).abs());
    }

    #[test]
    fn symmetrized_difference() {
        let g = TimeGrid::<f64>::covering(1.0, 0.5).unwrap();
        let x = Path::from_fn(g, 2, |t: f64| vec![1.0 + t, 2.0]).unwrap();
        let y = Path::from_fn(g, 2, |t: f64| vec![t, -1.0]).unwrap();
        let d = discounted_outer_difference(&x, &y, 0.0, 1.0, 0.0, true).unwrap();
        // entries (0,1) and (1,0) must agree
        assert!((d[1] - d[2]).abs() < 1e-15);
        assert!(discounted_outer_difference(&x, &Path::zeros(g, 1), 0.0, 1.0, 0.0, true).is_err());
    }

    #[test]
    fn window_errors() {
        let x = constant(1.0, 0.1, 1.0);
        let e = discounted_outer_integral(&x, &x, 0.5, 1.0, 0.0, Quadrature::Rectangle, None)
            .unwrap_err();
        assert!(matches!(e, Error::WindowOutOfRange { .. }));
        assert!(
            discounted_outer_integral(&x, &x, 0.05, 0.5, 0.0, Quadrature::Rectangle, None).is_err()
        );
        assert!(
            discounted_outer_integral(&x, &x, 0.0, 0.5, 0.0, Quadrature::Simpson, None).is_err()
        );
        assert!(discounted_outer_integral(
            &x,
            &x,
            0.0,
            0.5,
            0.0,
            Quadrature::Rectangle,
            Some(0.15)
        )
        .is_err());
    }
}
