//! Replication studies for the indirect estimators in `invreg-core`:
//! simulated designs scored by model error, random train/test splits of a
//! CSV dataset scored by prediction error, and an error-versus-`n` table.

pub mod config;
pub mod decay;
pub mod error;
pub mod experiment;
pub mod holdout;
pub mod metrics;
pub mod report;
pub mod tables;

pub use error::{BenchError, Result};
pub use experiment::{run_simulation, ExperimentConfig, ExperimentReport};
pub use holdout::{run_holdout_study, HoldoutConfig, HoldoutData, HoldoutReport};
