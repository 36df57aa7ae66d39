//! Experiment harness behind the `rcmdp` command.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{EvalConfig, EvalMode, ExperimentConfig, InstanceSource, SetSpec};
pub use error::{BenchError, Result};
