//! Simulation and joint phase/visibility estimation for two-photon polarimetric
//! tracking of sucrose inversion.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circular;
pub mod config;
pub mod crossing;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod io;
pub mod kinetics;
pub mod model;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
