use cdf_core::zoo::{classify, dispersion_spectrum, time_domain_growth, Classification, GrowthConfig, LinearSystemSpec};
use serde::{Deserialize, Serialize};

use super::{core_error, linspace, matrix, solver_error, Context, RunError};
use crate::config::{section, ConfigError, ExperimentConfig};
use crate::output::{Cell, indexed, Artifact, Check, Outcome, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Preset {
    #[default]
    AntiDampedTelegraph,
    DampedTelegraph,
    /// `A·U_t + A₁·U_x = B·U` from `model.a`, `model.a1`, `model.b`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Expect {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Model {
    system: Preset,
    a: Option<Vec<Vec<f64>>>,
    a1: Option<Vec<Vec<f64>>>,
    b: Option<Vec<Vec<f64>>>,
    k_max: f64,
    k_count: usize,
    growth: GrowthConfig,
    /// Defaults to the preset's known character; required for `custom`.
    expect: Option<Expect>,
    classify_tol: f64,
    rate_tolerance: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            system: Preset::AntiDampedTelegraph,
            a: None,
            a1: None,
            b: None,
            k_max: 4.0,
            k_count: 401,
            growth: GrowthConfig::default(),
            expect: None,
            classify_tol: 1e-10,
            rate_tolerance: 0.1,
        }
    }
}

pub struct Plan {
    model: Model,
    spec: LinearSystemSpec,
    expect: Expect,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model: Model = section(&cfg.model, "model")?;
    if !cfg.solver.is_null() {
        return Err(ConfigError::new("solver", "not used by this experiment; set model.growth.cfl instead"));
    }
    let (spec, default_expect) = match model.system {
        Preset::Custom => {
            let get = |m: &Option<Vec<Vec<f64>>>, key: &str| match m {
                Some(rows) => matrix(rows, &format!("model.{key}")),
                None => Err(ConfigError::new(format!("model.{key}"), "required for a custom system")),
            };
            let spec = LinearSystemSpec::new(get(&model.a, "a")?, get(&model.a1, "a1")?, get(&model.b, "b")?)
                .map_err(|e| ConfigError::new("model.a", e))?;
            (spec, None)
        }
        preset => {
            for (key, m) in [("a", &model.a), ("a1", &model.a1), ("b", &model.b)] {
                if m.is_some() {
                    return Err(ConfigError::new(format!("model.{key}"), "only allowed with system = custom"));
                }
            }
            match preset {
                Preset::AntiDampedTelegraph => (LinearSystemSpec::anti_damped_telegraph(), Some(Expect::Unstable)),
                _ => (LinearSystemSpec::damped_telegraph(), Some(Expect::Stable)),
            }
        }
    };
    let expect = model
        .expect
        .or(default_expect)
        .ok_or_else(|| ConfigError::new("model.expect", "required for a custom system"))?;
    if model.k_count < 2 || !(model.k_max > 0.0) {
        return Err(ConfigError::new("model.k_count", "need at least two wavenumbers on (0, k_max]"));
    }
    Ok(Plan { model, spec, expect })
}

#[derive(Serialize)]
struct Summary {
    expect: Expect,
    classification: Classification,
    condition_number: f64,
    time_domain_rate: f64,
    fit_residual: f64,
    relative_rate_error: f64,
}

impl Plan {
    pub fn execute(&self, ctx: &Context) -> Result<Outcome, RunError> {
        let m = &self.model;
        let ks = linspace(0.0, m.k_max, m.k_count);
        let rows = dispersion_spectrum(&self.spec, &ks).map_err(|e| core_error("model", e))?;
        let cls = classify(&rows, m.classify_tol);
        let run = time_domain_growth(&self.spec, &m.growth).map_err(|e| solver_error("model.growth", e))?;

        let d = self.spec.dim();
        let header = std::iter::once("k".to_string()).chain(indexed("re", d)).chain(indexed("im", d));
        let mut spectrum = Table::new(header);
        for r in &rows {
            let mut row = vec![r.k.into()];
            row.extend(r.re.iter().chain(&r.im).map(|v| Cell::Num(*v)));
            spectrum.push(row);
        }
        let mut growth = Table::new(["t", "l2"]);
        for (t, v) in run.times.iter().zip(&run.l2) {
            growth.push(vec![(*t).into(), (*v).into()]);
        }
        let rel = (run.rate - cls.max_growth).abs() / cls.max_growth.abs();
        let checks = match self.expect {
            Expect::Unstable => vec![
                Check::flag("classified-unstable", !cls.stable && cls.max_growth > 0.0, format!("max Re λ = {:e}", cls.max_growth)),
                Check::at_most("growth-rate-match", rel, ctx.tolerance_or(m.rate_tolerance)),
            ],
            Expect::Stable => {
                let (first, last) = (run.l2[0], *run.l2.last().expect("at least one sample"));
                vec![
                    Check::flag("classified-stable", cls.stable, format!("max Re λ = {:e}", cls.max_growth)),
                    Check::flag("time-domain-decay", last < first, format!("‖U‖ from {first:e} to {last:e}")),
                ]
            }
        };
        let summary = Summary {
            expect: self.expect,
            classification: cls,
            condition_number: self.spec.condition_number(),
            time_domain_rate: run.rate,
            fit_residual: run.fit_residual,
            relative_rate_error: rel,
        };
        Ok(Outcome {
            artifacts: vec![
                Artifact::csv("spectrum.csv", &spectrum),
                Artifact::csv("growth.csv", &growth),
                Artifact::json("summary.json", &summary),
            ],
            checks,
        })
    }
}
