//! Configuration-driven experiment runner for `cdf-core`.
//!
//! A run reads one JSON config, executes the named experiment and writes
//! CSV and JSON artifacts plus a `manifest.json` with SHA-256 hashes of
//! every emitted file.

pub mod config;
pub mod experiments;
pub mod output;
pub mod registry;
pub mod rng;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, ExperimentId};
pub use runner::{run, run_text, ExitStatus, RunOptions, RunReport};
