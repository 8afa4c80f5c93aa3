//! Configuration, experiment runners, CSV output and the validation suite
//! used by the `urllc-codesign` binary.

pub mod config;
pub mod output;
pub mod runners;
pub mod units;
pub mod validation;
