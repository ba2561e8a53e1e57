//! Limit theorems for quadratic variations of Gaussian sequences, made computable.
//!
//! A centred Gaussian process observed along a partition is turned into a
//! Gaussian vector `Y` by a difference scheme (first-order increments,
//! second-order Begyn differences, or general zero-sum `a`-differences). The
//! exact covariance matrix `Γ = E[Y Yᵀ]` then decides everything about the
//! quadratic variation `V = Σ Y_k²`:
//!
//! * its mean is `trace Γ` (the energy), its variance `2‖Γ‖_F²`;
//! * almost sure convergence follows from `‖Γ‖₂ = o(1/log n)`;
//! * the central limit theorem holds iff `Σλ⁴ = o((Σλ²)²)`, with a
//!   Berry-Esseen bound driven by the excess kurtosis.
//!
//! The crate is `no_std` (with `alloc`). File formats, the command-line
//! front end and the parallel Monte Carlo driver live in the `qvar` crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
mod linalg;
mod matrix;
mod normal;
mod quadrature;
mod regression;

pub mod estimators;
pub mod kernels;
pub mod limits;
pub mod montecarlo;
pub mod partitions;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::SymmetricEigen;
pub use matrix::CovMatrix;
pub use normal::{normal_cdf, normal_quantile};
pub use regression::{least_squares, LineFit};
