use cdf_core::linalg::{self, Mat, Vector};
use cdf_core::stochastic::{detailed_balance, onsager_matrix, positive_stability_check, simulate_master, MarkovGenerator, StepMode};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{matrix, max_increase, random_distribution, stochastic_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, indexed, Artifact, Check, Outcome, Table};
use crate::rng;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
struct RandomSuite {
    count: usize,
    min_states: usize,
    max_states: usize,
    /// Probability of each extra edge.
    density: f64,
    reversible_fraction: f64,
    horizon: f64,
    dt: f64,
}

impl Default for RandomSuite {
    fn default() -> Self {
        Self { count: 100, min_states: 2, max_states: 6, density: 0.4, reversible_fraction: 0.5, horizon: 5.0, dt: 0.02 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    /// `rates[i][j]` is the rate from `j` into `i`; the diagonal is ignored.
    rates: Option<Vec<Vec<f64>>>,
    kt: f64,
    /// Uniform when absent.
    p0: Option<Vec<f64>>,
    horizon: f64,
    dt: f64,
    step: StepMode,
    random: Option<RandomSuite>,
    onsager_tol: f64,
    free_energy_slack: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            rates: None,
            kt: 1.0,
            p0: None,
            horizon: 5.0,
            dt: 0.01,
            step: StepMode::Implicit,
            random: None,
            onsager_tol: 1e-10,
            free_energy_slack: 1e-8,
        }
    }
}

pub struct Plan {
    model: Model,
    single: Option<(MarkovGenerator, Vector)>,
}

fn generator(rows: &[Vec<f64>], kt: f64) -> Result<MarkovGenerator, ConfigError> {
    let q = matrix(rows, "model.rates")?;
    let n = q.nrows();
    if q.ncols() != n {
        return Err(ConfigError::new("model.rates", "must be square"));
    }
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] != 0.0 {
                triples.push((i, j, q[(i, j)]));
            }
        }
    }
    MarkovGenerator::from_rates(n, &triples)
        .and_then(|g| g.with_temperature(kt))
        .map_err(|e| ConfigError::new("model.rates", e))
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    if !cfg.solver.is_null() {
        return Err(ConfigError::new("solver", "not used by this experiment"));
    }
    if model.rates.is_none() && model.random.is_none() {
        return Err(ConfigError::new("model", "need model.rates, model.random or both"));
    }
    if !(model.dt > 0.0 && model.horizon > 0.0) {
        return Err(ConfigError::new("model.dt", "dt and horizon must be positive"));
    }
    if let Some(r) = &model.random {
        if r.min_states < 2 || r.max_states < r.min_states {
            return Err(ConfigError::new("model.random.min_states", "need 2 ≤ min_states ≤ max_states"));
        }
        if !(r.dt > 0.0 && r.horizon > 0.0) {
            return Err(ConfigError::new("model.random.dt", "dt and horizon must be positive"));
        }
        if !(0.0..=1.0).contains(&r.density) || !(0.0..=1.0).contains(&r.reversible_fraction) {
            return Err(ConfigError::new("model.random.density", "density and reversible_fraction must lie in [0, 1]"));
        }
    }
    let single = match &model.rates {
        None => None,
        Some(rows) => {
            let g = generator(rows, model.kt)?;
            let n = g.n();
            let p0 = match &model.p0 {
                Some(p) if p.len() != n => {
                    return Err(ConfigError::new("model.p0", format!("{} entries for {n} states", p.len())));
                }
                Some(p) => Vector::from_column_slice(p),
                None => Vector::from_element(n, 1.0 / n as f64),
            };
            Some((g, p0))
        }
    };
    Ok(Plan { model, single })
}

/// One random draw of the theorem suite.
#[derive(Debug, Clone, Serialize)]
struct SuiteRow {
    index: usize,
    states: usize,
    reversible: bool,
    onsager_residual: f64,
    null_residual: f64,
    positive_stable: bool,
    min_real_part: f64,
    asymmetry: f64,
    detailed_balance: bool,
    symmetry_matches_balance: bool,
    free_energy_increase: f64,
}

fn draw(suite: &RandomSuite, seed: u64, index: usize, tol: f64) -> Result<SuiteRow, RunError> {
    let mut rng = rng::stream(seed, index as u64);
    let n = rng.random_range(suite.min_states..=suite.max_states);
    let reversible = rng.random::<f64>() < suite.reversible_fraction;
    let g = if reversible {
        MarkovGenerator::random_reversible(&mut rng, n, suite.density)
    } else {
        MarkovGenerator::random(&mut rng, n, suite.density)
    };
    let p = Vector::from_vec(random_distribution(&mut rng, n));
    let (onsager_residual, m) = match onsager_matrix(&g, &p) {
        Ok(d) => (d.residual, d.m),
        // An inconsistent factorization is a failed row, not an aborted run.
        Err(_) => (f64::INFINITY, Mat::from_element(n, n, f64::NAN)),
    };
    let ps = positive_stability_check(&m, tol);
    let asym = linalg::asymmetry(&m);
    let db = detailed_balance(&g);
    let traj = simulate_master(&g, &p, suite.horizon, suite.dt, StepMode::Implicit).map_err(|e| stochastic_error("model.random", e))?;
    Ok(SuiteRow {
        index,
        states: n,
        reversible,
        onsager_residual,
        null_residual: ps.null_residual,
        positive_stable: ps.pass,
        min_real_part: ps.min_real_part,
        asymmetry: asym,
        detailed_balance: db.holds,
        symmetry_matches_balance: (asym <= tol) == db.holds,
        free_energy_increase: max_increase(&traj.free_energy),
    })
}

fn suite_table(rows: &[SuiteRow]) -> Table {
    let mut t = Table::new([
        "index",
        "states",
        "reversible",
        "onsager_residual",
        "null_residual",
        "positive_stable",
        "min_real_part",
        "asymmetry",
        "detailed_balance",
        "symmetry_matches_balance",
        "free_energy_increase",
    ]);
    for r in rows {
        t.push(vec![
            r.index.into(),
            r.states.into(),
            r.reversible.into(),
            r.onsager_residual.into(),
            r.null_residual.into(),
            r.positive_stable.into(),
            r.min_real_part.into(),
            r.asymmetry.into(),
            r.detailed_balance.into(),
            r.symmetry_matches_balance.into(),
            r.free_energy_increase.into(),
        ]);
    }
    t
}

#[derive(Serialize)]
struct OnsagerJson {
    states: usize,
    steady_state: Vec<f64>,
    p0: Vec<f64>,
    mobility: Vec<Vec<f64>>,
    force: Vec<f64>,
    flux: Vec<f64>,
    residual: f64,
    positive_stable: bool,
    detailed_balance: bool,
    asymmetry: f64,
}

#[derive(Serialize, Default)]
struct Summary {
    trajectory_free_energy_increase: Option<f64>,
    trajectory_mass_error: Option<f64>,
    suite_count: usize,
    suite_max_onsager_residual: Option<f64>,
    suite_max_null_residual: Option<f64>,
    suite_positive_stable: Option<usize>,
    suite_symmetry_matches_balance: Option<usize>,
    suite_max_free_energy_increase: Option<f64>,
}

fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let slack = ctx.tolerance_or(m.free_energy_slack);
        let mut artifacts = Vec::new();
        let mut checks = Vec::new();
        let mut summary = Summary::default();

        if let Some((g, p0)) = &self.single {
            let traj = simulate_master(g, p0, m.horizon, m.dt, m.step).map_err(|e| stochastic_error("model", e))?;
            let n = g.n();
            let header = ["t", "free_energy", "tsallis", "production"].into_iter().map(String::from).chain(indexed("p", n));
            let mut t = Table::new(header);
            let mut mass_err: f64 = 0.0;
            for (k, s) in traj.states.iter().enumerate() {
                let mut row = vec![traj.times[k].into(), traj.free_energy[k].into(), traj.tsallis[k].into(), traj.production[k].into()];
                row.extend(s.iter().map(|v| Cell::Num(*v)));
                t.push(row);
                mass_err = mass_err.max((s.sum() - 1.0).abs());
            }
            artifacts.push(Artifact::csv("trajectory.csv", &t));
            let inc = max_increase(&traj.free_energy);
            checks.push(Check::at_most("free-energy-non-increasing", inc, slack));
            checks.push(Check::at_most("probability-conserved", mass_err, 1e-10));
            summary.trajectory_free_energy_increase = Some(inc);
            summary.trajectory_mass_error = Some(mass_err);

            // The decomposition is taken at the interior point halfway to the steady state.
            let p_mid = (p0 + g.steady_state()) * 0.5;
            let dec = onsager_matrix(g, &p_mid).map_err(|e| stochastic_error("model.p0", e))?;
            let ps = positive_stability_check(&dec.m, m.onsager_tol);
            checks.push(Check::at_most("onsager-residual", dec.residual, m.onsager_tol));
            checks.push(Check::flag("positive-stability", ps.pass, format!("min Re λ = {:e}", ps.min_real_part)));
            artifacts.push(Artifact::json(
                "onsager.json",
                &OnsagerJson {
                    states: n,
                    steady_state: g.steady_state().iter().copied().collect(),
                    p0: p_mid.iter().copied().collect(),
                    mobility: rows_of(&dec.m),
                    force: dec.x.iter().copied().collect(),
                    flux: dec.j.iter().copied().collect(),
                    residual: dec.residual,
                    positive_stable: ps.pass,
                    detailed_balance: detailed_balance(g).holds,
                    asymmetry: linalg::asymmetry(&dec.m),
                },
            ));
        }

        if let Some(suite) = &m.random {
            let rows = (0..suite.count)
                .into_par_iter()
                .map(|i| draw(suite, ctx.seed, i, m.onsager_tol))
                .collect::<Result<Vec<_>, _>>()?;
            artifacts.push(Artifact::csv("suite.csv", &suite_table(&rows)));
            let max = |f: fn(&SuiteRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
            let (res, null, fe) = (max(|r| r.onsager_residual), max(|r| r.null_residual), max(|r| r.free_energy_increase));
            let stable = rows.iter().filter(|r| r.positive_stable).count();
            let sym = rows.iter().filter(|r| r.symmetry_matches_balance).count();
            checks.push(Check::at_most("suite-onsager-residual", res, m.onsager_tol));
            checks.push(Check::at_most("suite-null-vector", null, m.onsager_tol));
            checks.push(Check::flag("suite-positive-stability", stable == rows.len(), format!("{stable}/{}", rows.len())));
            checks.push(Check::flag("suite-symmetry-iff-detailed-balance", sym == rows.len(), format!("{sym}/{}", rows.len())));
            checks.push(Check::at_most("suite-free-energy-non-increasing", fe, slack));
            summary.suite_count = rows.len();
            summary.suite_max_onsager_residual = Some(res);
            summary.suite_max_null_residual = Some(null);
            summary.suite_positive_stable = Some(stable);
            summary.suite_symmetry_matches_balance = Some(sym);
            summary.suite_max_free_energy_increase = Some(fe);
        }
        artifacts.push(Artifact::json("summary.json", &summary));
        Ok(Outcome { artifacts, checks })
    }
}
