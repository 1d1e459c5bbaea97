//! Configuration, orchestration and reporting for smoothed best-response experiments.

pub mod config;
pub mod error;
pub mod run;
pub mod solve;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use config::ExperimentConfig;
pub use error::{exit_code, Failure};
