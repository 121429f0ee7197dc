#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod nn;
pub mod problems;
pub mod sampler;
pub mod specfun;
pub mod stats;
pub mod wos;

#[cfg(test)]
mod oracle;

pub use error::{Error, Result};
