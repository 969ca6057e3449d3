use cdf_core::zoo::axonal::steady_state_residual;
use cdf_core::zoo::{axonal_relaxation, axonal_steady_state, AxonalParams, AxonalRunConfig};
use serde::{Deserialize, Serialize};

use super::{core_error, linspace, solver_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, indexed, Artifact, Check, Outcome, Table};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    params: AxonalParams,
    run: AxonalRunConfig,
    residual_points: usize,
    fd_step: f64,
    residual_tol: f64,
    /// The run passes once some sampled sup-norm distance drops below this.
    sup_target: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            params: AxonalParams::default(),
            run: AxonalRunConfig::default(),
            residual_points: 100,
            fd_step: 1e-4,
            residual_tol: 1e-8,
            sup_target: 1e-4,
        }
    }
}

pub struct Plan {
    model: Model,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    if !cfg.solver.is_null() {
        return Err(ConfigError::new("solver", "not used by this experiment; see model.run"));
    }
    model.params.validate().map_err(|e| ConfigError::new("model.params", e))?;
    if model.params.velocities.iter().any(|l| *l <= 0.0) {
        return Err(ConfigError::new("model.params.velocities", "all velocities must be positive"));
    }
    let r = &model.run;
    if !(r.length > 0.0 && r.horizon > 0.0 && r.cfl > 0.0 && r.width > 0.0) || r.cells < 2 || r.samples < 2 {
        return Err(ConfigError::new("model.run", "length, horizon, cfl and width must be positive with at least two cells and samples"));
    }
    if model.residual_points < 2 || !(model.fd_step > 0.0) {
        return Err(ConfigError::new("model.fd_step", "need a positive step and at least two residual points"));
    }
    Ok(Plan { model })
}

#[derive(Serialize)]
struct Summary {
    steady_residual: f64,
    min_sup_distance: f64,
    first_time_below_target: Option<f64>,
    final_sup_distance: f64,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let p = &m.params;
        let xs = linspace(0.0, m.run.length, m.residual_points);
        let mut steady = Table::new(std::iter::once("x".to_string()).chain(indexed("b", p.n())));
        for &x in &xs {
            let b = axonal_steady_state(p, x).map_err(|e| core_error("model.params", e))?;
            let mut row = vec![x.into()];
            row.extend(b.iter().map(|v| Cell::Num(*v)));
            steady.push(row);
        }
        // Interior points keep the stencil inside the domain.
        let interior: Vec<f64> = xs.iter().copied().filter(|x| *x - m.fd_step >= 0.0 && *x + m.fd_step <= m.run.length).collect();
        let residual = steady_state_residual(p, &interior, m.fd_step).map_err(|e| core_error("model.params", e))?;
        let run = axonal_relaxation(p, &m.run).map_err(|e| solver_error("model.run", e))?;
        let mut dist = Table::new(["t", "sup_distance"]);
        for (t, d) in run.times.iter().zip(&run.sup_distance) {
            dist.push(vec![(*t).into(), (*d).into()]);
        }
        let min = run.sup_distance.iter().copied().fold(f64::INFINITY, f64::min);
        let first = run.times.iter().zip(&run.sup_distance).find(|(_, d)| **d < m.sup_target).map(|(t, _)| *t);
        let checks = vec![
            Check::at_most("steady-state-residual", residual, ctx.tolerance_or(m.residual_tol)),
            Check::flag(
                "relaxes-to-steady-state",
                first.is_some(),
                format!("min sup distance {min:e} against {:e}", m.sup_target),
            ),
        ];
        let summary = Summary {
            steady_residual: residual,
            min_sup_distance: min,
            first_time_below_target: first,
            final_sup_distance: *run.sup_distance.last().unwrap_or(&f64::NAN),
        };
        Ok(Outcome {
            artifacts: vec![
                Artifact::csv("steady.csv", &steady),
                Artifact::csv("distance.csv", &dist),
                Artifact::json("summary.json", &summary),
            ],
            checks,
        })
    }
}
