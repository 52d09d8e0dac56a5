#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimates;
pub mod evolution;
pub mod geometry;
pub mod quadrature;
pub mod root_system;
pub mod special;
pub mod spherical;
pub mod wave_kernel;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(test)]
mod testutil;
