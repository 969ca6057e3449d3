use cdf_core::linalg::Vector;
use cdf_core::stochastic::{simulate_mass_action, MassActionTrajectory, OdeOptions, Reaction, ReactionNetwork};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{linspace, ode_options, max_increase, stochastic_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, Artifact, Check, Outcome, Table};
use crate::rng;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RandomSuite {
    count: usize,
    species: usize,
    reactions: usize,
    horizon: f64,
}

impl Default for RandomSuite {
    fn default() -> Self {
        Self { count: 10, species: 4, reactions: 3, horizon: 5.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    /// Detailed-balance equilibrium; enables free-energy monitoring.
    equilibrium: Option<Vec<f64>>,
    c0: Vec<f64>,
    horizon: f64,
    samples: usize,
    random: Option<RandomSuite>,
    invariant_tol: f64,
    free_energy_slack: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            species: Vec::new(),
            reactions: Vec::new(),
            equilibrium: None,
            c0: Vec::new(),
            horizon: 10.0,
            samples: 201,
            random: None,
            invariant_tol: 1e-10,
            free_energy_slack: 1e-8,
        }
    }
}

pub struct Plan {
    model: Model,
    opts: OdeOptions,
    network: Option<ReactionNetwork>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    let opts = ode_options(&cfg.solver)?;
    if model.species.is_empty() && model.random.is_none() {
        return Err(ConfigError::new("model", "need model.species and model.reactions, model.random or both"));
    }
    if !(model.horizon > 0.0) || model.samples < 2 {
        return Err(ConfigError::new("model.horizon", "need a positive horizon and at least two samples"));
    }
    if let Some(r) = &model.random {
        if r.species == 0 || r.reactions == 0 || !(r.horizon > 0.0) {
            return Err(ConfigError::new("model.random", "species, reactions and horizon must be positive"));
        }
    }
    let network = if model.species.is_empty() {
        None
    } else {
        let mut net =
            ReactionNetwork::new(model.species.clone(), model.reactions.clone()).map_err(|e| ConfigError::new("model.reactions", e))?;
        if let Some(ce) = &model.equilibrium {
            net = net.with_equilibrium(ce.clone()).map_err(|e| ConfigError::new("model.equilibrium", e))?;
        }
        if model.c0.len() != net.n_species() || model.c0.iter().any(|v| !(*v >= 0.0)) {
            return Err(ConfigError::new("model.c0", format!("need {} nonnegative concentrations", net.n_species())));
        }
        Some(net)
    };
    Ok(Plan { model, opts, network })
}

/// Largest drift of the linear invariants `Wᵀc` over the trajectory.
fn invariant_drift(net: &ReactionNetwork, traj: &MassActionTrajectory) -> f64 {
    let w = net.conservation_laws();
    if w.ncols() == 0 {
        return 0.0;
    }
    let inv0 = w.transpose() * &traj.states[0];
    let scale = inv0.amax().max(1.0);
    traj.states.iter().map(|s: &Vector| (w.transpose() * s - &inv0).amax() / scale).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
struct SuiteRow {
    index: usize,
    invariants: usize,
    invariant_drift: f64,
    free_energy_increase: f64,
}

#[derive(Serialize, Default)]
struct Summary {
    invariants: Option<usize>,
    invariant_drift: Option<f64>,
    free_energy_increase: Option<f64>,
    warning: Option<String>,
    suite_count: usize,
    suite_max_invariant_drift: Option<f64>,
    suite_max_free_energy_increase: Option<f64>,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let slack = ctx.tolerance_or(m.free_energy_slack);
        let mut artifacts = Vec::new();
        let mut checks = Vec::new();
        let mut summary = Summary::default();

        if let Some(net) = &self.network {
            let times = linspace(0.0, m.horizon, m.samples);
            let traj = simulate_mass_action(net, &m.c0, m.horizon, &self.opts, Some(&times)).map_err(|e| stochastic_error("model", e))?;
            let mut header = vec!["t".to_string()];
            header.extend(net.species.iter().cloned());
            if traj.free_energy.is_some() {
                header.push("free_energy".into());
            }
            let mut t = Table::new(header);
            for (k, s) in traj.states.iter().enumerate() {
                let mut row = vec![traj.times[k].into()];
                row.extend(s.iter().map(|v| Cell::Num(*v)));
                if let Some(fe) = &traj.free_energy {
                    row.push(fe[k].into());
                }
                t.push(row);
            }
            artifacts.push(Artifact::csv("trajectory.csv", &t));
            let drift = invariant_drift(net, &traj);
            checks.push(Check::at_most("invariant-drift", drift, m.invariant_tol));
            summary.invariants = Some(net.conservation_laws().ncols());
            summary.invariant_drift = Some(drift);
            if let Some(fe) = &traj.free_energy {
                let inc = max_increase(fe);
                checks.push(Check::at_most("free-energy-non-increasing", inc, slack));
                summary.free_energy_increase = Some(inc);
            }
            summary.warning = traj.warning;
        }

        if let Some(suite) = &m.random {
            let rows = (0..suite.count)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng::stream(ctx.seed, i as u64);
                    let net = ReactionNetwork::random_reversible(&mut rng, suite.species, suite.reactions);
                    let c0: Vec<f64> = (0..suite.species).map(|_| rng.random_range(0.1..2.0)).collect();
                    let traj = simulate_mass_action(&net, &c0, suite.horizon, &self.opts, None)
                        .map_err(|e| stochastic_error("model.random", e))?;
                    let fe = traj.free_energy.as_deref().map_or(f64::NAN, max_increase);
                    Ok(SuiteRow {
                        index: i,
                        invariants: net.conservation_laws().ncols(),
                        invariant_drift: invariant_drift(&net, &traj),
                        free_energy_increase: fe,
                    })
                })
                .collect::<Result<Vec<_>, RunError>>()?;
            let mut t = Table::new(["index", "invariants", "invariant_drift", "free_energy_increase"]);
            for r in &rows {
                t.push(vec![r.index.into(), r.invariants.into(), r.invariant_drift.into(), r.free_energy_increase.into()]);
            }
            artifacts.push(Artifact::csv("suite.csv", &t));
            let drift = rows.iter().map(|r| r.invariant_drift).fold(0.0, f64::max);
            let fe = rows.iter().map(|r| r.free_energy_increase).fold(0.0, f64::max);
            checks.push(Check::at_most("suite-invariant-drift", drift, m.invariant_tol * suite.horizon.max(1.0)));
            checks.push(Check::at_most("suite-free-energy-non-increasing", fe, slack));
            summary.suite_count = rows.len();
            summary.suite_max_invariant_drift = Some(drift);
            summary.suite_max_free_energy_increase = Some(fe);
        }
        artifacts.push(Artifact::json("summary.json", &summary));
        Ok(Outcome { artifacts, checks })
    }
}
