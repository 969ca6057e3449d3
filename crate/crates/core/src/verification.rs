//! Manufactured-solution refinement study for the split solver on the
//! linear telegraph system `u_t + v_x = 0`, `v_t + u_x = −v/ε`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::CdfError;
use crate::field::{l2_distance, Grid1D, StateField};
use crate::linalg::{self, Mat};
use crate::solver::{integrate, integrate_forced, SolverConfig, SolverError};
use crate::system::LinearBalanceLaw;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OrderStudyConfig {
    pub cells: usize,
    pub end_time: f64,
    /// Coarsest step; each level halves it.
    pub base_dt: f64,
    pub levels: usize,
    pub epsilon: f64,
    /// Steps of the unforced periodic run used for the mass-drift check.
    pub drift_steps: usize,
}

impl Default for OrderStudyConfig {
    fn default() -> Self {
        Self { cells: 200, end_time: 0.48, base_dt: 0.003, levels: 4, epsilon: 1.0, drift_steps: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrderRow {
    pub dt: f64,
    /// `‖U_dt − U_{dt/2}‖_{L²}` at the final time.
    pub difference: f64,
    /// `‖U_dt − U*‖_{L²}` against the manufactured solution.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrderReport {
    pub rows: Vec<OrderRow>,
    /// Log-log slope of the successive differences against `dt`.
    pub order: f64,
    /// Largest per-step change of the conserved total on the periodic run.
    pub max_mass_drift: f64,
}

const OMEGA: f64 = 2.0 * PI;

/// `u* = sin(ω(x − t))`, `v* = cos(ωx)·sin t`.
pub fn manufactured_state(x: f64, t: f64, out: &mut [f64]) {
    out[0] = libm::sin(OMEGA * (x - t));
    out[1] = libm::cos(OMEGA * x) * libm::sin(t);
}

/// `∂_t U* + ∂_x F(U*) − Q(U*)/ε`.
pub fn manufactured_forcing(x: f64, t: f64, eps: f64, out: &mut [f64]) {
    let c = libm::cos(OMEGA * (x - t));
    out[0] = -OMEGA * c - OMEGA * libm::sin(OMEGA * x) * libm::sin(t);
    out[1] = libm::cos(OMEGA * x) * libm::cos(t) + OMEGA * c + libm::cos(OMEGA * x) * libm::sin(t) / eps;
}

pub fn telegraph() -> LinearBalanceLaw {
    LinearBalanceLaw::new(1, Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]), Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]))
        .expect("telegraph blocks are consistent")
}

pub fn telegraph_order_study(cfg: &OrderStudyConfig) -> Result<OrderReport, SolverError> {
    if cfg.levels < 2 || cfg.cells < 4 || !(cfg.base_dt > 0.0) {
        return Err(CdfError::Configuration(format!(
            "order study needs ≥ 2 levels, ≥ 4 cells and a positive step, got {} levels, {} cells, dt = {}",
            cfg.levels, cfg.cells, cfg.base_dt
        ))
        .into());
    }
    let sys = telegraph();
    let grid = Grid1D::periodic(0.0, 1.0, cfg.cells)?;
    let field0 = StateField::from_fn(grid.clone(), 2, |x, out| manufactured_state(x, 0.0, out));
    let exact = StateField::from_fn(grid.clone(), 2, |x, out| manufactured_state(x, cfg.end_time, out));
    let eps = cfg.epsilon;
    let forcing = move |x: f64, t: f64, out: &mut [f64]| manufactured_forcing(x, t, eps, out);
    let mut finals = Vec::with_capacity(cfg.levels + 1);
    let mut dts = Vec::with_capacity(cfg.levels + 1);
    for level in 0..=cfg.levels {
        let dt = cfg.base_dt / (1u64 << level) as f64;
        let run = SolverConfig { end_time: cfg.end_time, epsilon: eps, dt: Some(dt), snapshots: 1, ..SolverConfig::default() };
        let traj = integrate_forced(&sys, &field0, &run, Some(&forcing))?;
        finals.push(traj.final_field);
        dts.push(dt);
    }
    let mut rows = Vec::with_capacity(cfg.levels);
    for k in 0..cfg.levels {
        rows.push(OrderRow {
            dt: dts[k],
            difference: l2_distance(&finals[k], &finals[k + 1])?,
            error: l2_distance(&finals[k], &exact)?,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (libm::log(r.dt), libm::log(r.difference))).unzip();
    let order = linalg::linear_fit(&x, &y).0;

    let drift_cfg = SolverConfig {
        end_time: cfg.base_dt * cfg.drift_steps as f64,
        epsilon: eps,
        dt: Some(cfg.base_dt),
        snapshots: 1,
        ..SolverConfig::default()
    };
    let bumpy = StateField::from_fn(grid, 2, |x, out| {
        out[0] = 1.0 + 0.5 * libm::sin(OMEGA * x) + 0.2 * libm::cos(3.0 * OMEGA * x);
        out[1] = 0.3 * libm::sin(2.0 * OMEGA * x);
    });
    let traj = integrate(&sys, &bumpy, &drift_cfg)?;
    let max_mass_drift = traj
        .diagnostics
        .windows(2)
        .map(|w| (w[1].conserved_totals[0] - w[0].conserved_totals[0]).abs())
        .fold(0.0, f64::max);
    Ok(OrderReport { rows, order, max_mass_drift })
}
