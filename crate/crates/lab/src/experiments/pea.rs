use cdf_core::stochastic::ode::OdeOptions;
use cdf_core::stochastic::pea::{loglog_slope, pea_error, sample_times};
use cdf_core::stochastic::{PeaReduction, PeaRow, ReactionNetwork};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ode_options, stochastic_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, indexed, Artifact, Check, Outcome, Table};

/// Michaelis–Menten `S + E ⇌ ES → P + E` with the binding step fast.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    k1: f64,
    k_minus1: f64,
    k2: f64,
    /// Initial `(S, E, ES, P)`.
    c0: Vec<f64>,
    horizon: f64,
    epsilons: Vec<f64>,
    fast: Vec<usize>,
    slow: Vec<usize>,
    samples: usize,
    min_slope: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k_minus1: 1.0,
            k2: 1.0,
            c0: vec![1.0, 0.5, 0.0, 0.0],
            horizon: 5.0,
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4],
            fast: vec![0],
            slow: vec![1],
            samples: 201,
            min_slope: 0.9,
        }
    }
}

pub struct Plan {
    model: Model,
    ode: OdeOptions,
    reduction: PeaReduction,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    let ode = ode_options(&cfg.solver)?;
    if model.c0.len() != 4 {
        return Err(ConfigError::new("model.c0", "needs the four concentrations (S, E, ES, P)"));
    }
    if model.epsilons.len() < 2 || model.epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(ConfigError::new("model.epsilons", "needs at least two positive values"));
    }
    if model.epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ConfigError::new("model.epsilons", "must be strictly decreasing"));
    }
    if !(model.horizon > 0.0) {
        return Err(ConfigError::new("model.horizon", "must be positive"));
    }
    let net = ReactionNetwork::michaelis_menten(model.k1, model.k_minus1, model.k2)
        .map_err(|e| ConfigError::new("model", e))?;
    let reduction = PeaReduction::new(&net, &model.fast, &model.slow).map_err(|e| ConfigError::new("model.fast", e))?;
    Ok(Plan { model, ode, reduction })
}

#[derive(Serialize)]
struct Summary<'a> {
    t0: f64,
    slope: Option<f64>,
    rows: &'a [PeaRow],
}

impl Plan {
    pub fn execute(&self, _ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let red = &self.reduction;
        let eps_max = m.epsilons[0];
        let t0 = red.layer_time(&m.c0, eps_max);
        let samples = sample_times(t0, m.horizon, m.samples);
        let reduced = red.trajectory(&m.c0, m.horizon, &samples, &self.ode).map_err(|e| stochastic_error("model", e))?;
        let errors: Vec<f64> = m
            .epsilons
            .par_iter()
            .map(|&eps| pea_error(red, &m.c0, m.horizon, eps, &samples, &reduced, &self.ode))
            .collect::<Result<_, _>>()
            .map_err(|e| stochastic_error("model", e))?;
        let rows: Vec<PeaRow> = m.epsilons.iter().zip(&errors).map(|(&epsilon, &error)| PeaRow { epsilon, error }).collect();
        let slope = loglog_slope(&rows);

        let mut table = Table::new(["epsilon", "sup_error"]);
        for r in &rows {
            table.push(vec![r.epsilon.into(), r.error.into()]);
        }
        let mut traj = Table::new(std::iter::once("t".to_string()).chain(indexed("c", 4)));
        for (t, c) in samples.iter().zip(&reduced) {
            let mut row = vec![(*t).into()];
            row.extend(c.iter().map(|v| Cell::Num(*v)));
            traj.push(row);
        }
        let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
        let s = slope.unwrap_or(f64::NAN);
        let checks = vec![
            Check::flag("error-monotone-in-epsilon", monotone, "sup-error strictly decreases with ε"),
            Check::at_least("loglog-slope", s, m.min_slope),
        ];
        let summary = Summary { t0, slope, rows: &rows };
        Ok(Outcome {
            artifacts: vec![
                Artifact::csv("errors.csv", &table),
                Artifact::csv("reduced.csv", &traj),
                Artifact::json("summary.json", &summary),
            ],
            checks,
        })
    }
}
