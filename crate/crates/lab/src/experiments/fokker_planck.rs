use cdf_core::linalg::Vector;
use cdf_core::stochastic::{fokker_planck_generator, simulate_master, FokkerPlanck, StepMode};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{max_increase, random_distribution, stochastic_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Artifact, Check, Outcome, Table};
use crate::rng;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Initial {
    center: f64,
    width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RandomSuite {
    count: usize,
    x_left: f64,
    x_right: f64,
    cells: usize,
    horizon: f64,
    dt: f64,
}

impl Default for RandomSuite {
    fn default() -> Self {
        Self { count: 10, x_left: -4.0, x_right: 4.0, cells: 160, horizon: 1.0, dt: 0.01 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    /// `V(x) = Σ potential[k]·x^k`; the drift is `−D·V′`.
    potential: Vec<f64>,
    diffusion: f64,
    x_left: f64,
    x_right: f64,
    cells: usize,
    initial: Initial,
    horizon: f64,
    dt: f64,
    /// L¹ distance allowed between the discrete steady state and `e^{−V}`.
    gibbs_tol: Option<f64>,
    random: Option<RandomSuite>,
    free_energy_slack: f64,
}

impl Default for Initial {
    fn default() -> Self {
        Self { center: 1.5, width: 0.5 }
    }
}

impl Default for Model {
    fn default() -> Self {
        Self {
            potential: vec![0.0, 0.0, 0.5],
            diffusion: 1.0,
            x_left: -5.0,
            x_right: 5.0,
            cells: 200,
            initial: Initial::default(),
            horizon: 5.0,
            dt: 0.01,
            gibbs_tol: Some(1e-3),
            random: None,
            free_energy_slack: 1e-8,
        }
    }
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect()
}

fn discretize(potential: &[f64], d: f64, a: f64, b: f64, cells: usize) -> Result<FokkerPlanck, cdf_core::StochasticError> {
    let dv = derivative(potential);
    fokker_planck_generator(&move |x| -d * poly(&dv, x), &move |_| d, a, b, cells)
}

pub struct Plan {
    model: Model,
    fp: FokkerPlanck,
    p0: Vector,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    if !cfg.solver.is_null() {
        return Err(ConfigError::new("solver", "not used by this experiment"));
    }
    if model.potential.iter().any(|c| !c.is_finite()) {
        return Err(ConfigError::new("model.potential", "coefficients must be finite"));
    }
    if !(model.diffusion > 0.0) {
        return Err(ConfigError::new("model.diffusion", "must be positive"));
    }
    if !(model.initial.width > 0.0) {
        return Err(ConfigError::new("model.initial.width", "must be positive"));
    }
    if !(model.dt > 0.0 && model.horizon > 0.0) {
        return Err(ConfigError::new("model.dt", "dt and horizon must be positive"));
    }
    if let Some(r) = &model.random {
        if !(r.dt > 0.0 && r.horizon > 0.0) {
            return Err(ConfigError::new("model.random.dt", "dt and horizon must be positive"));
        }
        // The widest draw must satisfy the Péclet bound.
        discretize(&[0.0, 0.5, 2.0, 0.0, 0.05], 0.5, r.x_left, r.x_right, r.cells)
            .map_err(|e| ConfigError::new("model.random.cells", e))?;
    }
    let fp = discretize(&model.potential, model.diffusion, model.x_left, model.x_right, model.cells)
        .map_err(|e| ConfigError::new("model", e))?;
    let raw: Vec<f64> = fp
        .centers
        .iter()
        .map(|x| (-(x - model.initial.center).powi(2) / (2.0 * model.initial.width.powi(2))).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(ConfigError::new("model.initial.center", "initial bump has no mass on the grid"));
    }
    let p0 = Vector::from_iterator(raw.len(), raw.iter().map(|v| v / total));
    Ok(Plan { model, fp, p0 })
}

#[derive(Debug, Clone, Serialize)]
struct SuiteRow {
    index: usize,
    c1: f64,
    c2: f64,
    c4: f64,
    diffusion: f64,
    free_energy_increase: f64,
    tsallis_increase: f64,
}

#[derive(Serialize)]
struct Summary {
    free_energy_increase: f64,
    tsallis_increase: f64,
    gibbs_l1_distance: f64,
    suite_count: usize,
    suite_max_free_energy_increase: Option<f64>,
    suite_max_tsallis_increase: Option<f64>,
}

fn gibbs(potential: &[f64], centers: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = centers.iter().map(|x| poly(potential, *x)).collect();
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = v.iter().map(|vi| (vmin - vi).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|wi| wi / total).collect()
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let slack = ctx.tolerance_or(m.free_energy_slack);
        let traj = simulate_master(&self.fp.generator, &self.p0, m.horizon, m.dt, StepMode::Implicit)
            .map_err(|e| stochastic_error("model", e))?;
        let f2: Vec<f64> = traj.states.iter().map(|p| self.fp.tsallis(p)).collect();
        let mut t = Table::new(["t", "free_energy", "tsallis", "production"]);
        for k in 0..traj.times.len() {
            t.push(vec![traj.times[k].into(), traj.free_energy[k].into(), f2[k].into(), traj.production[k].into()]);
        }
        let ps = self.fp.generator.steady_state();
        let g = gibbs(&m.potential, &self.fp.centers);
        let last = traj.states.last().expect("at least the initial state");
        let mut fin = Table::new(["x", "density", "steady_density", "gibbs_density"]);
        for (i, x) in self.fp.centers.iter().enumerate() {
            let dx = self.fp.dx;
            fin.push(vec![(*x).into(), (last[i] / dx).into(), (ps[i] / dx).into(), (g[i] / dx).into()]);
        }
        let l1: f64 = ps.iter().zip(&g).map(|(a, b)| (a - b).abs()).sum();
        let (fe, ts) = (max_increase(&traj.free_energy), max_increase(&f2));
        let mut checks = vec![
            Check::at_most("free-energy-non-increasing", fe, slack),
            Check::at_most("tsallis-non-increasing", ts, slack),
        ];
        if let Some(tol) = m.gibbs_tol {
            checks.push(Check::at_most("steady-state-matches-gibbs", l1, tol));
        }
        let mut artifacts = vec![Artifact::csv("trajectory.csv", &t), Artifact::csv("final.csv", &fin)];
        let mut summary = Summary {
            free_energy_increase: fe,
            tsallis_increase: ts,
            gibbs_l1_distance: l1,
            suite_count: 0,
            suite_max_free_energy_increase: None,
            suite_max_tsallis_increase: None,
        };

        if let Some(suite) = &m.random {
            let rows = (0..suite.count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng::stream(ctx.seed, i as u64);
                    let (c1, c2, c4) = (rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0), rng.random_range(0.0..0.05));
                    let d = rng.random_range(0.5..1.5);
                    let fp = discretize(&[0.0, c1, c2, 0.0, c4], d, suite.x_left, suite.x_right, suite.cells)
                        .map_err(|e| stochastic_error("model.random", e))?;
                    let p0 = Vector::from_vec(random_distribution(&mut rng, suite.cells));
                    let tr = simulate_master(&fp.generator, &p0, suite.horizon, suite.dt, StepMode::Implicit)
                        .map_err(|e| stochastic_error("model.random", e))?;
                    let f2: Vec<f64> = tr.states.iter().map(|p| fp.tsallis(p)).collect();
                    Ok(SuiteRow {
                        index: i,
                        c1,
                        c2,
                        c4,
                        diffusion: d,
                        free_energy_increase: max_increase(&tr.free_energy),
                        tsallis_increase: max_increase(&f2),
                    })
                })
                .collect::<Result<Vec<_>, RunError>>()?;
            let mut st = Table::new(["index", "c1", "c2", "c4", "diffusion", "free_energy_increase", "tsallis_increase"]);
            for r in &rows {
                st.push(vec![
                    r.index.into(),
                    r.c1.into(),
                    r.c2.into(),
                    r.c4.into(),
                    r.diffusion.into(),
                    r.free_energy_increase.into(),
                    r.tsallis_increase.into(),
                ]);
            }
            artifacts.push(Artifact::csv("suite.csv", &st));
            let fe = rows.iter().map(|r| r.free_energy_increase).fold(0.0, f64::max);
            let ts = rows.iter().map(|r| r.tsallis_increase).fold(0.0, f64::max);
            checks.push(Check::at_most("suite-free-energy-non-increasing", fe, slack));
            checks.push(Check::at_most("suite-tsallis-non-increasing", ts, slack));
            summary.suite_count = rows.len();
            summary.suite_max_free_energy_increase = Some(fe);
            summary.suite_max_tsallis_increase = Some(ts);
        }
        artifacts.push(Artifact::json("summary.json", &summary));
        Ok(Outcome { artifacts, checks })
    }
}
