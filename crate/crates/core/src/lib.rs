//! Small-time and large-time large-deviation asymptotics for rough fractional
//! stochastic volatility models.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod error;
pub mod fbm;
pub mod largetime;
pub mod mc;
pub mod optim;
pub mod quadrature;
pub mod rate;
pub mod smile;
pub mod stats;

pub use error::{Error, Result};
pub use fbm::{Hurst, KernelGrid, TimeGrid};
