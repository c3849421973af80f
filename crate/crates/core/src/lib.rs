//! Data-driven computation of ε-Nash equilibria for linear-quadratic-Gaussian
//! mean-field games.
//!
//! The kernel is generic over [`Real`] (`f32`, `f64`); the `*64` aliases
//! below fix the double-precision instantiation used by the runner, the
//! `*32` ones the single-precision one.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod datapipe;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod numkit;
pub mod population;
pub mod scalar;

pub use error::{Error, Result};
pub use model::LqgGameModel;
pub use scalar::Real;

pub type Matrix64 = numkit::Matrix<f64>;
pub type SymMatrix64 = numkit::SymMatrix<f64>;
pub type Model64 = LqgGameModel<f64>;
pub type History64 = numkit::IterationHistory<f64>;
pub type Solution64 = equilibrium::EquilibriumSolution<f64>;

pub type Matrix32 = numkit::Matrix<f32>;
pub type Model32 = LqgGameModel<f32>;
