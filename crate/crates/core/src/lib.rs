//! Simulation, reduction and verification toolkit for differential privacy in
//! the pan-private and robust shuffle trust models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod finite_dist;
pub mod harness;
pub mod info_metrics;
pub mod reductions;
pub mod rng;
pub mod stats;
pub mod trust_models;

pub use error::{Error, Result};
