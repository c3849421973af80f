//! Discounted difference and integral matrices built from expectation paths.

pub mod export;
pub mod integrals;
pub mod plan;
pub mod regression;

pub use export::write_regression_csv;
pub use integrals::{
    corrected_outer_difference, discounted_outer_difference, discounted_outer_integral,
};
pub use plan::{Quadrature, SamplingPlan};
pub use regression::{
    build_regression_data, check_assumptions, require, symmetric_cross_integral, Assumption,
    AverageBlock, CrossBlock, ErrorBlock, RankReport, RegressionData,
};
