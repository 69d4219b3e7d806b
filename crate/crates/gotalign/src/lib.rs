//! Experiment runner for `gotalign-core`: configuration files, checkpoints,
//! metrics and heatmap output, dataset export and the acceptance checks.

pub mod checkpoint;
pub mod checks;
pub mod config;
pub mod error;
pub mod export;
pub mod heatmap;
pub mod metrics;
pub mod run;

pub use config::{ConfigBuilder, RunConfig};
pub use error::{Error, Result};
