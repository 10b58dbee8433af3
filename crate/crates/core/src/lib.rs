//! Executable cross-checks between complex and self-adjoint random matrix and tensor models.
//!
//! Each identity is evaluated along independent paths: permutation-sum closed forms,
//! brute-force Wick pairings, a truncated polynomial engine for the intermediate-field
//! side, and Monte Carlo in the convergent Hermitian sector.

// `!(x < bound)` is used on purpose so that NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chars;
pub mod closed_forms;
pub mod covariance;
pub mod error;
pub mod fixtures;
pub mod jet;
pub mod job;
pub mod linalg;
pub mod mc;
pub mod perm;
pub mod report;
pub mod scalar;
pub mod series;
pub mod tensor;
pub mod wick;

pub use error::{EquivError, Result};
