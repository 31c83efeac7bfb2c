//! Ultrametric Cantor sets, sublinear scaling laws, stretched-exponential
//! diffusion propagators and anomalous random walks.
//!
//! * [`cantor`]: two-map IFS pre-fractals, gap measure, dimensions, Minkowski sums.
//! * [`ultrametric`]: scale-invariant valuation, inversion rule, Cantor function.
//! * [`scaling`]: sublinear exponent, MSD laws, regime classification, power-law fits.
//! * [`diffusion`]: Gaussian and stretched propagators, residual checks, moments.
//! * [`walker`]: reproducible Monte Carlo walks and MSD estimation.

// `!(x > 0.0)` style checks are used so that NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod diffusion;
pub mod error;
pub mod numfmt;
pub mod scaling;
mod stats;
pub mod ultrametric;
pub mod walker;

pub use error::{Error, Result};
