//! State-space Gaussian process inference for long and streaming time series.
//!
//! One-dimensional GP priors built from Matérn and periodic kernels (and their
//! sums and products) are compiled into linear time-invariant SDEs, discretized
//! on an equidistant grid, and solved by
//!
//! - [`exact`]: the Kalman filter / RTS smoother, `O(m³)` per step, with
//!   assumed density filtering for non-Gaussian likelihoods;
//! - [`ihgp`]: the infinite-horizon approximation, which swaps the per-step
//!   Riccati recursion for lookups into steady-state solutions tabulated over
//!   the likelihood variance ([`steady`]), `O(m²)` per step.
//!
//! [`grad`] differentiates the steady-state marginal likelihood and implements
//! batch and online hyperparameter learning; [`lgcp`] bins event times for
//! log-Gaussian Cox process intensity estimation.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; enable `libm` in that case.

#![cfg_attr(not(feature = "std"), no_std)]
// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub use error::{Error, Result};

pub mod exact;
pub mod expm;
pub mod grad;
pub mod ihgp;
pub mod lgcp;
pub mod lik;
pub mod linalg;
pub mod special;
pub mod ssm;
pub mod steady;

pub use exact::{GaussianState, PosteriorMarginals};
pub use ihgp::{ihgp_infer, ihgp_regression, IhgpResult};
pub use lik::{LikelihoodModel, SitePair};
pub use ssm::{DiscreteModel, KernelSpec, LtiSde, MaternOrder};
pub use steady::{build_grid, GammaGrid, GridOptions, SteadyStateSet};

/// Dense matrix type used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense column vector type used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
