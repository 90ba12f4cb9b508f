//! Differentiable specular ray tracing for radio propagation.

// `!(x > 0.0)` style guards deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod channel;
pub mod cli;
pub mod em;
pub mod error;
pub mod mathdiff;
pub mod optim;
pub mod scene;
pub mod tracer;

#[cfg(test)]
pub(crate) mod fixtures;

pub use error::{Error, Result};
