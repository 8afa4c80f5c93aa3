//! Prediction and communication co-design for ultra-reliable low-latency
//! devices: analytical error models, the delay-budget optimizer built on
//! them, and the experiment runners behind the command-line tool.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codesign;
pub mod error;
pub mod phy;
pub mod prediction;
pub mod queueing;
pub mod specfun;

pub use error::{Error, Infeasibility, Result};
pub use specfun::Probability;
