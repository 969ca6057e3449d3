//! Experiment implementations.
//!
//! Each experiment parses its `model` and `solver` blocks up front in
//! `prepare`, so a schema violation never leaves partial outputs, then runs
//! in `execute` and returns artifacts plus acceptance checks.

mod axonal;
mod check;
mod control;
mod dispersion;
mod fokker_planck;
mod fourier;
mod master;
mod mass_action;
mod pea;
mod simulate;
pub mod systems;

use cdf_core::linalg::Mat;
use cdf_core::solver::{DiagnosticRow, SolverError};
use cdf_core::stochastic::OdeOptions;
use cdf_core::{CdfError, Grid1D, StateField, StochasticError};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig, ExperimentId};
use crate::output::{Cell, indexed, Artifact, Outcome, Table};

/// Run-wide settings resolved from the config and the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub seed: u64,
    pub tolerance: Option<f64>,
}

impl Context {
    pub fn tolerance_or(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// The diagnostics recorded up to the failure are kept as artifacts.
    #[error("numerical divergence: {message}")]
    Divergence { message: String, artifacts: Vec<Artifact> },
    #[error("runtime failure: {0}")]
    Runtime(String),
}

pub(crate) fn core_error(path: &str, e: CdfError) -> RunError {
    match e {
        CdfError::Configuration(_) | CdfError::Structural(_) | CdfError::Domain { .. } | CdfError::InvalidSample { .. } => {
            RunError::Config(ConfigError::new(path, e))
        }
        CdfError::Evaluation { .. } => RunError::Runtime(e.to_string()),
    }
}

pub(crate) fn solver_error(path: &str, e: SolverError) -> RunError {
    match e {
        SolverError::Divergence { step, time, reason, diagnostics, .. } => RunError::Divergence {
            message: format!("step {step}, t = {time}: {reason}"),
            artifacts: vec![Artifact::csv("diagnostics.csv", &diagnostics_table(&diagnostics))],
        },
        SolverError::Stiffness { .. } => RunError::Divergence { message: e.to_string(), artifacts: Vec::new() },
        SolverError::Model(m) => core_error(path, m),
    }
}

pub(crate) fn stochastic_error(path: &str, e: StochasticError) -> RunError {
    match e {
        StochasticError::InvalidGenerator(_)
        | StochasticError::Reducible { .. }
        | StochasticError::Domain(_)
        | StochasticError::Discretization(_) => RunError::Config(ConfigError::new(path, e)),
        StochasticError::StepSize { .. } | StochasticError::Integration { .. } | StochasticError::Reduction { .. } => {
            RunError::Divergence { message: e.to_string(), artifacts: Vec::new() }
        }
        StochasticError::Inconsistent(_) => RunError::Runtime(e.to_string()),
    }
}

/// The `solver` block of the ODE-driven experiments.
pub(crate) fn ode_options(value: &serde_json::Value) -> Result<OdeOptions, ConfigError> {
    let o: OdeOptions = crate::config::section(value, "solver")?;
    if !(o.rtol > 0.0) {
        return Err(ConfigError::new("solver.rtol", "must be positive"));
    }
    if !(o.atol > 0.0) {
        return Err(ConfigError::new("solver.atol", "must be positive"));
    }
    if o.initial_step.is_some_and(|h| !(h > 0.0)) {
        return Err(ConfigError::new("solver.initial_step", "must be positive"));
    }
    if o.max_steps == 0 {
        return Err(ConfigError::new("solver.max_steps", "must be positive"));
    }
    Ok(o)
}

pub fn diagnostics_table(rows: &[DiagnosticRow]) -> Table {
    let n = rows.first().map_or(0, |r| r.conserved_totals.len());
    let header = ["step", "time", "total_entropy", "total_production", "l2_to_equilibrium"]
        .into_iter()
        .map(String::from)
        .chain(indexed("conserved", n));
    let mut t = Table::new(header);
    for r in rows {
        let mut row = vec![r.step.into(), r.time.into(), r.total_entropy.into(), r.total_production.into(), r.l2_to_equilibrium.into()];
        row.extend(r.conserved_totals.iter().map(|v| Cell::Num(*v)));
        t.push(row);
    }
    t
}

pub fn field_table(field: &StateField) -> Table {
    let mut t = Table::new(std::iter::once("x".to_string()).chain(indexed("u", field.dim)));
    for (i, u) in field.cells().enumerate() {
        let mut row = vec![field.grid.center(i).into()];
        row.extend(u.iter().map(|v| Cell::Num(*v)));
        t.push(row);
    }
    t
}

/// Largest single-step increase of `series`; zero for a non-increasing one.
pub fn max_increase(series: &[f64]) -> f64 {
    series.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

pub fn matrix(rows: &[Vec<f64>], path: &str) -> Result<Mat, ConfigError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(ConfigError::new(path, "expected a non-empty rectangular array of rows"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(path, "entries must be finite"));
    }
    Ok(Mat::from_row_slice(n, m, &flat))
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Positive probability vector with entries drawn from `[0.05, 1)` and
/// normalized.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    #[default]
    Periodic,
    Outflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub cells: usize,
    pub boundary: BoundaryKind,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_left: 0.0, x_right: 1.0, cells: 200, boundary: BoundaryKind::Periodic }
    }
}

impl GridSpec {
    pub fn build(&self, path: &str) -> Result<Grid1D, ConfigError> {
        let b = match self.boundary {
            BoundaryKind::Periodic => cdf_core::Boundary::Periodic,
            BoundaryKind::Outflow => cdf_core::Boundary::Outflow,
        };
        Grid1D::new(self.x_left, self.x_right, self.cells, b.clone(), b).map_err(|e| ConfigError::new(path, e))
    }
}

/// `U(x) = U_e + amplitude·exp(−(x − center)²/(2·width²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    /// One entry per component; missing entries are zero.
    pub amplitude: Vec<f64>,
}

impl Default for Bump {
    fn default() -> Self {
        Self { center: 0.5, width: 0.05, amplitude: vec![0.1] }
    }
}

impl Bump {
    pub fn validate(&self, dim: usize, path: &str) -> Result<(), ConfigError> {
        if !(self.width > 0.0) {
            return Err(ConfigError::new(format!("{path}.width"), "must be positive"));
        }
        if self.amplitude.len() > dim {
            return Err(ConfigError::new(
                format!("{path}.amplitude"),
                format!("{} entries for a {dim}-component state", self.amplitude.len()),
            ));
        }
        Ok(())
    }

    pub fn field(&self, grid: Grid1D, base: &[f64]) -> StateField {
        StateField::from_fn(grid, base.len(), |x, out| {
            let g = (-(x - self.center) * (x - self.center) / (2.0 * self.width * self.width)).exp();
            for (k, o) in out.iter_mut().enumerate() {
                *o = base[k] + g * self.amplitude.get(k).copied().unwrap_or(0.0);
            }
        })
    }
}

/// A fully parsed experiment.
pub enum Plan {
    Check(check::Plan),
    Simulate(simulate::Plan),
    FourierLimit(fourier::Plan),
    Pea(pea::Plan),
    Dispersion(dispersion::Plan),
    BoundaryControl(control::Plan),
    Master(master::Plan),
    MassAction(mass_action::Plan),
    FokkerPlanck(fokker_planck::Plan),
    Axonal(axonal::Plan),
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    Ok(match cfg.experiment {
        ExperimentId::Check => Plan::Check(check::prepare(cfg)?),
        ExperimentId::Simulate => Plan::Simulate(simulate::prepare(cfg)?),
        ExperimentId::FourierLimit => Plan::FourierLimit(fourier::prepare(cfg)?),
        ExperimentId::Pea => Plan::Pea(pea::prepare(cfg)?),
        ExperimentId::Dispersion => Plan::Dispersion(dispersion::prepare(cfg)?),
        ExperimentId::BoundaryControl => Plan::BoundaryControl(control::prepare(cfg)?),
        ExperimentId::Master => Plan::Master(master::prepare(cfg)?),
        ExperimentId::MassAction => Plan::MassAction(mass_action::prepare(cfg)?),
        ExperimentId::FokkerPlanck => Plan::FokkerPlanck(fokker_planck::prepare(cfg)?),
        ExperimentId::Axonal => Plan::Axonal(axonal::prepare(cfg)?),
    })
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        match self {
            Plan::Check(p) => p.execute(ctx),
            Plan::Simulate(p) => p.execute(ctx),
            Plan::FourierLimit(p) => p.execute(ctx),
            Plan::Pea(p) => p.execute(ctx),
            Plan::Dispersion(p) => p.execute(ctx),
            Plan::BoundaryControl(p) => p.execute(ctx),
            Plan::Master(p) => p.execute(ctx),
            Plan::MassAction(p) => p.execute(ctx),
            Plan::FokkerPlanck(p) => p.execute(ctx),
            Plan::Axonal(p) => p.execute(ctx),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_increase_ignores_decreases() {
        assert_eq!(max_increase(&[3.0, 2.0, 2.5, 1.0]), 0.5);
        assert_eq!(max_increase(&[1.0]), 0.0);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let e = matrix(&[vec![1.0, 2.0], vec![3.0]], "model.a").unwrap_err();
        assert_eq!(e.path, "model.a");
        assert_eq!(matrix(&[vec![1.0, 2.0], vec![3.0, 4.0]], "m").unwrap()[(1, 0)], 3.0);
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
