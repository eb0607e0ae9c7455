// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Maximum a posteriori state paths for Bayesian hidden Markov models.

pub mod cluster;
pub mod error;
pub mod harness;
pub mod hmm;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod segment;

pub use error::{Error, Result};
