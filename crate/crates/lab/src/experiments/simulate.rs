use cdf_core::solver::{integrate, SolverConfig, Trajectory};
use cdf_core::verification::{telegraph_order_study, OrderStudyConfig};
use cdf_core::{CdfSystem, StateField};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::systems::{self, SystemId};
use super::{diagnostics_table, field_table, max_increase, solver_error, Bump, Context, GridSpec, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, indexed, Artifact, Check, Outcome, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    #[default]
    Trajectory,
    OrderStudy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    mode: Mode,
    system: Option<SystemId>,
    params: Value,
    grid: GridSpec,
    initial: Bump,
    /// Allowed per-step decrease of the concave-oriented total entropy,
    /// relative to its initial magnitude.
    entropy_slack: f64,
    order_study: OrderStudyConfig,
    min_order: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            mode: Mode::Trajectory,
            system: None,
            params: Value::Null,
            grid: GridSpec::default(),
            initial: Bump::default(),
            entropy_slack: 1e-8,
            order_study: OrderStudyConfig::default(),
            min_order: 1.8,
        }
    }
}

const DRIFT_TOL: f64 = 1e-12;

enum Run {
    Trajectory { system: Box<dyn CdfSystem>, field0: StateField, solver: SolverConfig },
    OrderStudy,
}

pub struct Plan {
    model: Model,
    run: Run,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    let run = match model.mode {
        Mode::OrderStudy => {
            if model.system.is_some() {
                return Err(ConfigError::new("model.system", "the order study always uses the telegraph system"));
            }
            Run::OrderStudy
        }
        Mode::Trajectory => {
            let id = model.system.ok_or_else(|| ConfigError::new("model.system", "required in trajectory mode"))?;
            let system = systems::build(id, &model.params, "model.params")?;
            let solver: SolverConfig = section(&cfg.solver, "solver")?;
            solver.validate().map_err(|e| ConfigError::new("solver", e))?;
            let grid = model.grid.build("model.grid")?;
            model.initial.validate(system.layout().dim(), "model.initial")?;
            let field0 = model.initial.field(grid, system.equilibrium());
            if let Some((i, u)) = field0.cells().enumerate().find(|(_, u)| system.check_state(u).is_err()) {
                let e = system.check_state(u).unwrap_err();
                return Err(ConfigError::new("model.initial", format!("cell {i}: {e}")));
            }
            Run::Trajectory { system, field0, solver }
        }
    };
    Ok(Plan { model, run })
}

fn snapshots_table(traj: &Trajectory) -> Table {
    let dim = traj.final_field.dim;
    let header = ["time", "x"].into_iter().map(String::from).chain(indexed("u", dim));
    let mut t = Table::new(header);
    for snap in &traj.snapshots {
        for (i, u) in snap.cells().enumerate() {
            let mut row = vec![snap.time.into(), snap.grid.center(i).into()];
            row.extend(u.iter().map(|v| Cell::Num(*v)));
            t.push(row);
        }
    }
    t
}

#[derive(Serialize)]
struct TrajectorySummary {
    steps: usize,
    end_time: f64,
    periodic: bool,
    max_mass_drift: Option<f64>,
    max_entropy_decrease: Option<f64>,
    final_l2_to_equilibrium: f64,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        match &self.run {
            Run::OrderStudy => self.order_study(ctx),
            Run::Trajectory { system, field0, solver } => self.trajectory(ctx, &**system, field0, solver),
        }
    }

    fn order_study(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let rep = telegraph_order_study(&self.model.order_study).map_err(|e| solver_error("model.order_study", e))?;
        let mut t = Table::new(["dt", "difference", "error"]);
        for r in &rep.rows {
            t.push(vec![r.dt.into(), r.difference.into(), r.error.into()]);
        }
        let checks = vec![
            Check::at_least("temporal-order", rep.order, self.model.min_order),
            Check::at_most("mass-drift-per-step", rep.max_mass_drift, ctx.tolerance_or(DRIFT_TOL)),
        ];
        Ok(Outcome { artifacts: vec![Artifact::csv("order.csv", &t), Artifact::json("summary.json", &rep)], checks })
    }

    fn trajectory(&self, ctx: &Context, sys: &dyn CdfSystem, field0: &StateField, cfg: &SolverConfig) -> Result<Outcome, RunError> {
        let traj = integrate(sys, field0, cfg).map_err(|e| solver_error("model", e))?;
        let diag = &traj.diagnostics;
        let periodic = field0.grid.is_periodic();
        let mut checks = vec![Check::flag("finite", traj.final_field.is_finite(), "final field is finite")];
        let mut summary = TrajectorySummary {
            steps: traj.steps,
            end_time: traj.final_field.time,
            periodic,
            max_mass_drift: None,
            max_entropy_decrease: None,
            final_l2_to_equilibrium: diag.last().map_or(f64::NAN, |r| r.l2_to_equilibrium),
        };
        if periodic {
            let n = sys.layout().conserved;
            let mut drift: f64 = 0.0;
            for k in 0..n {
                let scale = diag.first().map_or(1.0, |r| r.conserved_totals[k].abs().max(1.0));
                for w in diag.windows(2) {
                    drift = drift.max((w[1].conserved_totals[k] - w[0].conserved_totals[k]).abs() / scale);
                }
            }
            summary.max_mass_drift = Some(drift);
            checks.push(Check::at_most("mass-drift-per-step", drift, ctx.tolerance_or(DRIFT_TOL)));
            if diag.first().is_some_and(|r| r.total_entropy.is_finite()) {
                // Decreases of the concave-oriented entropy are increases of −s.
                let sign = sys.orientation().concave_sign();
                let minus_s: Vec<f64> = diag.iter().map(|r| -sign * r.total_entropy).collect();
                let scale = minus_s[0].abs().max(1.0);
                let dec = max_increase(&minus_s) / scale;
                summary.max_entropy_decrease = Some(dec);
                checks.push(Check::at_most("entropy-non-decreasing", dec, self.model.entropy_slack));
            }
        }
        Ok(Outcome {
            artifacts: vec![
                Artifact::csv("diagnostics.csv", &diagnostics_table(diag)),
                Artifact::csv("final.csv", &field_table(&traj.final_field)),
                Artifact::csv("snapshots.csv", &snapshots_table(&traj)),
                Artifact::json("summary.json", &summary),
            ],
            checks,
        })
    }
}
