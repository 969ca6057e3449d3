use cdf_core::checks::Verdict;
use cdf_core::control::{check_assumptions, fit_decay_rate, simulate_controlled, AssumptionReport, ControlGains, ControlSystem, DecayFit};
use cdf_core::solver::SolverConfig;
use cdf_core::{CdfError, Grid1D};
use serde::{Deserialize, Serialize};

use super::{matrix, solver_error, Bump, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Artifact, Check, Outcome, Table};

/// Block form `A = [[a, b], [c, d]]`, damping `e` on the dissipative block
/// and symmetrizer `A₀ = diag(x1, x2)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Blocks {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
    x1: Vec<Vec<f64>>,
    x2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Expect {
    #[default]
    Decay,
    Reject,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    /// Jin–Xin damping `e`; ignored when `blocks` is given.
    e: f64,
    blocks: Option<Blocks>,
    gains: ControlGains,
    x_left: f64,
    x_right: f64,
    cells: usize,
    initial: Bump,
    discard: f64,
    expect: Expect,
    max_fit_residual: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            e: 1.0,
            blocks: None,
            gains: ControlGains::both(0.0),
            x_left: 0.0,
            x_right: 1.0,
            cells: 200,
            initial: Bump { center: 0.5, width: 0.1, amplitude: vec![1.0, 0.5] },
            discard: 0.2,
            expect: Expect::Decay,
            max_fit_residual: 0.05,
        }
    }
}

pub struct Plan {
    model: Model,
    system: ControlSystem,
    solver: SolverConfig,
    grid: Grid1D,
}

fn blocks(b: &Blocks) -> Result<ControlSystem, ConfigError> {
    let m = |rows: &Vec<Vec<f64>>, key: &str| -> Result<cdf_core::linalg::Mat, ConfigError> {
        // An empty block is a 0×k matrix; its width is implied by the others.
        if rows.is_empty() {
            return Ok(cdf_core::linalg::Mat::zeros(0, 0));
        }
        matrix(rows, &format!("model.blocks.{key}"))
    };
    let (a, d) = (m(&b.a, "a")?, m(&b.d, "d")?);
    let (n, k) = (a.nrows(), d.nrows());
    let fix = |x: cdf_core::linalg::Mat, r: usize, c: usize| if x.is_empty() { cdf_core::linalg::Mat::zeros(r, c) } else { x };
    ControlSystem::from_blocks(
        a,
        fix(m(&b.b, "b")?, n, k),
        fix(m(&b.c, "c")?, k, n),
        d,
        m(&b.e, "e")?,
        fix(m(&b.x1, "x1")?, n, n),
        m(&b.x2, "x2")?,
    )
    .map_err(|e: CdfError| ConfigError::new("model.blocks", e))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    let solver: SolverConfig = section(&cfg.solver, "solver")?;
    solver.validate().map_err(|e| ConfigError::new("solver", e))?;
    let system = match &model.blocks {
        Some(b) => blocks(b)?,
        None => ControlSystem::jin_xin(model.e),
    };
    model.gains.validate().map_err(|e| ConfigError::new("model.gains", e))?;
    let dim = system.conserved() + system.dissipative();
    model.initial.validate(dim, "model.initial")?;
    if !(0.0..1.0).contains(&model.discard) {
        return Err(ConfigError::new("model.discard", "must lie in [0, 1)"));
    }
    let grid = Grid1D::periodic(model.x_left, model.x_right, model.cells).map_err(|e| ConfigError::new("model.cells", e))?;
    Ok(Plan { model, system, solver, grid })
}

#[derive(Serialize)]
struct Summary {
    expect: Expect,
    assumptions_hold: bool,
    steps: Option<usize>,
    fit: Option<DecayFit>,
    refusal: Option<String>,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let report: AssumptionReport = check_assumptions(&self.system);
        let mut artifacts = vec![Artifact::json("assumptions.json", &report)];
        let mut checks = Vec::new();
        let mut summary = Summary { expect: m.expect, assumptions_hold: report.passed(), steps: None, fit: None, refusal: None };
        let zero = vec![0.0; self.system.conserved() + self.system.dissipative()];
        let field0 = m.initial.field(self.grid.clone(), &zero);
        match m.expect {
            Expect::Reject => {
                let failed: Vec<String> = report
                    .checks()
                    .iter()
                    .filter(|c| c.verdict == Verdict::Fail)
                    .map(|c| format!("{:?}", c.assumption))
                    .collect();
                checks.push(Check::flag("assumptions-rejected", !report.passed(), format!("failed: {}", failed.join(", "))));
                let refused = simulate_controlled(&self.system, &m.gains, &field0, &self.solver);
                summary.refusal = refused.as_ref().err().map(ToString::to_string);
                checks.push(Check::flag("simulation-refused", refused.is_err(), summary.refusal.clone().unwrap_or_default()));
            }
            Expect::Decay => {
                checks.push(Check::flag("assumptions-hold", report.passed(), "A1-A3 pass or are not applicable"));
                if report.passed() {
                    let run = simulate_controlled(&self.system, &m.gains, &field0, &self.solver)
                        .map_err(|e| solver_error("model", e))?;
                    let mut t = Table::new(["t", "l2"]);
                    for (a, b) in run.times.iter().zip(&run.l2) {
                        t.push(vec![(*a).into(), (*b).into()]);
                    }
                    artifacts.push(Artifact::csv("norm.csv", &t));
                    summary.steps = Some(run.steps);
                    match fit_decay_rate(&run.times, &run.l2, m.discard) {
                        Ok(fit) => {
                            checks.push(Check::flag("decay-rate-positive", fit.nu > 0.0, format!("ν = {:e}", fit.nu)));
                            checks.push(Check::at_most("fit-residual", fit.residual, ctx.tolerance_or(m.max_fit_residual)));
                            summary.fit = Some(fit);
                        }
                        Err(e) => checks.push(Check::flag("decay-fit", false, e.to_string())),
                    }
                }
            }
        }
        artifacts.push(Artifact::json("summary.json", &summary));
        Ok(Outcome { artifacts, checks })
    }
}
