//! Window geometry of the data-collection phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Left Riemann sum.
    #[default]
    Rectangle,
    Trapezoid,
    /// Composite Simpson; needs an even node count per window.
    Simpson,
    /// Left Riemann sum, with `Σ e^{−ρt_{k+1}} Δx_k ⊗ Δy_k` over the node
    /// increments removed from every difference. The data equations then
    /// hold exactly for Euler–Maruyama paths sampled at the simulation step.
    ProductRule,
}

/// Windows `[t_k, t_k + T]` with `t_k = t₁ + k·T_s`, `k = 0..l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SamplingPlan<T> {
    pub t1: T,
    pub l: usize,
    pub ts: T,
    /// Integration window `T`.
    pub window: T,
    /// Inner quadrature step; the path step when absent.
    #[serde(default)]
    pub quad_substep: Option<T>,
    #[serde(default)]
    pub quadrature: Quadrature,
}

impl<T: Real> SamplingPlan<T> {
    pub fn new(t1: T, l: usize, ts: T, window: T) -> Self {
        Self {
            t1,
            l,
            ts,
            window,
            quad_substep: None,
            quadrature: Quadrature::Rectangle,
        }
    }

    /// The plan covering `[t₁, t_l]` with spacing `T_s`.
    pub fn spanning(t1: T, tl: T, ts: T, window: T) -> Result<Self> {
        let steps = crate::population::steps_for(tl - t1, ts)?;
        Ok(Self::new(t1, steps + 1, ts, window))
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidArgument("plan.l must be at least 1".into()));
        }
        if !(self.ts > T::zero()) || !(self.window > T::zero()) || !(self.t1 >= T::zero()) {
            return Err(Error::InvalidArgument(
                "plan needs ts > 0, window > 0, t1 >= 0".into(),
            ));
        }
        if let Some(h) = self.quad_substep {
            if !(h > T::zero()) || h > self.window {
                return Err(Error::InvalidArgument(
                    "plan.quad_substep must lie in (0, window]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Start of window `k` (0-based).
    pub fn start(&self, k: usize) -> T {
        self.t1 + T::lit(k as f64) * self.ts
    }

    pub fn starts(&self) -> Vec<T> {
        (0..self.l).map(|k| self.start(k)).collect()
    }

    /// End of the last window, the horizon the data must cover.
    pub fn horizon(&self) -> T {
        self.start(self.l - 1) + self.window
    }

    /// First `l` windows of this plan.
    pub fn truncated(&self, l: usize) -> Self {
        Self { l, ..self.clone() }
    }
}
