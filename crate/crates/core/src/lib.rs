//! Differential network testing for pairs of Gaussian graphical models.
//!
//! Each node is regressed on the others in both datasets, either by two
//! independent lasso fits or by a multi-task fused lasso, and the difference
//! between the regression vectors is debiased into asymptotically normal
//! z-statistics. Those statistics are collected into a `p × (p − 1)` matrix of
//! edge-difference tests.

pub mod debias;
pub mod error;
pub mod eval;
pub mod fused;
pub mod ggm;
pub mod lasso;
pub mod linalg;
pub mod par;
pub mod qp;
pub mod simulate;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    standardize, EmpiricalCovariance, RegularizationParams, SampleMatrix, SolverConfig,
};
