//! Uniformly time-gridded vector paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub t0: T,
    pub dt: T,
    /// Number of instants, including both ends.
    pub len: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, dt: T, len: usize) -> Result<Self> {
        if !(dt > T::zero()) || !t0.is_finite() || len == 0 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs dt > 0 and len >= 1 (dt = {dt}, len = {len})"
            )));
        }
        Ok(Self { t0, dt, len })
    }

    /// Grid over `[0, horizon]` with `round(horizon / dt)` steps.
    pub fn covering(horizon: T, dt: T) -> Result<Self> {
        let steps = steps_for(horizon, dt)?;
        Self::new(T::zero(), dt, steps + 1)
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + T::lit(k as f64) * self.dt
    }

    pub fn end(&self) -> T {
        self.time(self.len - 1)
    }

    /// Index of the instant equal to `t`, tolerating rounding of `1e-6·dt`.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if k < T::zero() || (x - k).abs() > T::lit(1e-6) {
            return None;
        }
        let k = k.to_usize()?;
        (k < self.len).then_some(k)
    }

    /// Whether both grids list the same instants.
    pub fn matches(&self, other: &Self) -> bool {
        let tol = T::tol(1e-9) * self.dt;
        self.len == other.len
            && (self.t0 - other.t0).abs() <= tol
            && (self.dt - other.dt).abs() <= tol
    }
}

/// Integer step count for `horizon / dt`, which must be (nearly) integral.
pub fn steps_for<T: Real>(horizon: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(horizon >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and horizon >= 0 (dt = {dt}, horizon = {horizon})"
        )));
    }
    let x = horizon / dt;
    let k = x.round();
    if (x - k).abs() > T::lit(1e-6) * (T::one() + k) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a multiple of step {dt}"
        )));
    }
    k.to_usize()
        .ok_or_else(|| Error::InvalidArgument("step count overflow".into()))
}

/// Sequence of `dim`-vectors on a [`TimeGrid`], stored contiguously.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path<T> {
    pub grid: TimeGrid<T>,
    pub dim: usize,
    data: Vec<T>,
}

impl<T: Real> Path<T> {
    pub fn new(grid: TimeGrid<T>, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len * dim {
            return Err(Error::dims("Path::new", grid.len * dim, data.len()));
        }
        Ok(Self { grid, dim, data })
    }

    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        Self {
            grid,
            dim,
            data: vec![T::zero(); grid.len * dim],
        }
    }

    pub fn from_fn(grid: TimeGrid<T>, dim: usize, mut f: impl FnMut(T) -> Vec<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(grid.len * dim);
        for k in 0..grid.len {
            let v = f(grid.time(k));
            if v.len() != dim {
                return Err(Error::dims("Path::from_fn", dim, v.len()));
            }
            data.extend(v);
        }
        Ok(Self { grid, dim, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.grid.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.grid.len == 0
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[T] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn at_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.grid.matches(&other.grid) || self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "paths of {} x {} and {} x {} samples",
                self.len(),
                self.dim,
                other.len(),
                other.dim
            )));
        }
        Ok(Self {
            grid: self.grid,
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Keeps every `stride`-th sample.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        let len = (self.len() - 1) / stride + 1;
        let grid = TimeGrid::new(self.grid.t0, self.grid.dt * T::lit(stride as f64), len)?;
        let mut data = Vec::with_capacity(len * self.dim);
        for k in 0..len {
            data.extend_from_slice(self.at(k * stride));
        }
        Ok(Self {
            grid,
            dim: self.dim,
            data,
        })
    }
}
