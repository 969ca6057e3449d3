//! JSON experiment configuration.

use std::fmt;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Check,
    Simulate,
    FourierLimit,
    Pea,
    Dispersion,
    BoundaryControl,
    Master,
    MassAction,
    FokkerPlanck,
    Axonal,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::Check,
        ExperimentId::Simulate,
        ExperimentId::FourierLimit,
        ExperimentId::Pea,
        ExperimentId::Dispersion,
        ExperimentId::BoundaryControl,
        ExperimentId::Master,
        ExperimentId::MassAction,
        ExperimentId::FokkerPlanck,
        ExperimentId::Axonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Check => "check",
            ExperimentId::Simulate => "simulate",
            ExperimentId::FourierLimit => "fourier-limit",
            ExperimentId::Pea => "pea",
            ExperimentId::Dispersion => "dispersion",
            ExperimentId::BoundaryControl => "boundary-control",
            ExperimentId::Master => "master",
            ExperimentId::MassAction => "mass-action",
            ExperimentId::FokkerPlanck => "fokker-planck",
            ExperimentId::Axonal => "axonal",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Top-level config. `model` and `solver` are interpreted by the
/// experiment; see `docs/config-schema.md`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub model: Value,
    #[serde(default)]
    pub solver: Value,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the experiment's primary acceptance tolerance.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// A schema violation with the dotted path of the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

fn join(prefix: &str, inner: &str) -> String {
    match (prefix.is_empty(), inner == ".") {
        (true, true) => "<root>".into(),
        (true, false) => inner.into(),
        (false, true) => prefix.into(),
        (false, false) => format!("{prefix}.{inner}"),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| ConfigError::new(join("", &e.path().to_string()), e.inner()))?;
    if let Some(t) = cfg.tolerance {
        check_tolerance(t)?;
    }
    Ok(cfg)
}

pub fn check_tolerance(t: f64) -> Result<(), ConfigError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new("tolerance", format!("{t} must be positive and finite")))
    }
}

/// Deserializes a sub-block; `null` or absent gives the default.
pub fn section<T: DeserializeOwned + Default>(value: &Value, path: &str) -> Result<T, ConfigError> {
    if value.is_null() {
        return Ok(T::default());
    }
    required(value, path)
}

/// Deserializes a sub-block that has no default.
pub fn required<T: DeserializeOwned>(value: &Value, path: &str) -> Result<T, ConfigError> {
    if value.is_null() {
        return Err(ConfigError::new(path, "missing block"));
    }
    serde_path_to_error::deserialize(value).map_err(|e| ConfigError::new(join(path, &e.path().to_string()), e.inner()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_experiment_names_the_key() {
        let e = parse_config(r#"{"experiment": "nope"}"#).unwrap_err();
        assert_eq!(e.path, "experiment");
    }

    #[test]
    fn nested_path_is_prefixed() {
        #[derive(Debug, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Inner {
            #[allow(dead_code)]
            cells: usize,
        }
        let v: Value = serde_json::from_str(r#"{"cells": "many"}"#).unwrap();
        let e = section::<Inner>(&v, "model.grid").unwrap_err();
        assert_eq!(e.path, "model.grid.cells");
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let e = parse_config(r#"{"experiment": "pea", "tolerance": -1}"#).unwrap_err();
        assert_eq!(e.path, "tolerance");
    }
}
