use cdf_core::zoo::{cattaneo_front_speed, fourier_limit_study, FourierLimitConfig, FourierLimitReport, FrontSpeedConfig, FrontSpeedReport};
use serde::{Deserialize, Serialize};

use super::{core_error, solver_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Artifact, Check, Outcome, Table};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    study: FourierLimitConfig,
    /// `null` skips the front-speed measurement.
    front: Option<FrontSpeedConfig>,
    slope_min: f64,
    slope_max: f64,
    front_tolerance: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            study: FourierLimitConfig::default(),
            front: Some(FrontSpeedConfig::default()),
            slope_min: 0.9,
            slope_max: 2.1,
            front_tolerance: 0.05,
        }
    }
}

pub struct Plan {
    model: Model,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    if !cfg.solver.is_null() {
        return Err(ConfigError::new("solver", "not used by this experiment; set model.study.cfl instead"));
    }
    if !(model.slope_min <= model.slope_max) {
        return Err(ConfigError::new("model.slope_min", "must not exceed model.slope_max"));
    }
    Ok(Plan { model })
}

#[derive(Serialize)]
struct Summary<'a> {
    study: &'a FourierLimitReport,
    front: Option<FrontSpeedReport>,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let rep = fourier_limit_study(&m.study).map_err(|e| core_error("model.study", e))?;
        let mut t = Table::new(["tau", "error"]);
        for r in &rep.rows {
            t.push(vec![r.tau.into(), r.error.into()]);
        }
        let slope = rep.slope.unwrap_or(f64::NAN);
        let mut checks = vec![
            Check::flag("error-monotone-in-tau", rep.monotone, "L² error strictly decreases with τ"),
            Check::flag(
                "slope-in-range",
                slope >= m.slope_min && slope <= m.slope_max,
                format!("slope {slope:.4} in [{}, {}]", m.slope_min, m.slope_max),
            ),
        ];
        let front = match &m.front {
            Some(f) => {
                let r = cattaneo_front_speed(f).map_err(|e| solver_error("model.front", e))?;
                checks.push(Check::at_most("front-speed", r.relative_error, ctx.tolerance_or(m.front_tolerance)));
                Some(r)
            }
            None => None,
        };
        let summary = Summary { study: &rep, front };
        Ok(Outcome { artifacts: vec![Artifact::csv("errors.csv", &t), Artifact::json("summary.json", &summary)], checks })
    }
}
