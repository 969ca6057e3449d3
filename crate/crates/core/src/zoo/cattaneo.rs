//! Heat conduction with a relaxing heat flux.
//!
//! State `U = (u, w)`: internal energy and the dissipative variable conjugate
//! to the heat flux. The entropy is `s = c_v·ln u − w²/(2α(u))`, the
//! non-equilibrium temperature is `θ⁻¹ = s_u` and the heat flux is `q = s_w`,
//! so that
//!
//! ```text
//! u_t + q_x      = 0
//! w_t + (θ⁻¹)_x  = M·q,   M = c_v²/(λ·u²)
//! ```
//!
//! With constant `α = α₀` this is the classical Cattaneo law
//! `τ₀·q_t + λ·T_x + q = 0` with `τ₀ = α₀·λ·T²`. The thermomass closure uses
//! `α(u) = ρ·c_v/(2γ·u³)`, for which `θ⁻¹ = T⁻¹ − 3γ·w²·u²/(ρ·c_v)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;
use crate::field::{Boundary, Grid1D, StateField};
use crate::linalg::{self, Mat, Vector};
use crate::solver::{self, SolverConfig, SolverError, SourceMode};
use crate::system::{BalanceLaw, CdfSystem, Layout, LinearBalanceLaw, Orientation};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CattaneoParams {
    /// Relaxation time `τ₀` at the equilibrium temperature.
    pub tau0: f64,
    pub lambda: f64,
    pub cv: f64,
    /// Equilibrium temperature `T_e`.
    pub t_e: f64,
}

impl Default for CattaneoParams {
    fn default() -> Self {
        Self { tau0: 0.1, lambda: 1.0, cv: 1.0, t_e: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ThermomassParams {
    pub rho: f64,
    pub cv: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub t_e: f64,
}

impl Default for ThermomassParams {
    fn default() -> Self {
        Self { rho: 1.0, cv: 1.0, gamma: 1.0, lambda: 1.0, t_e: 1.0 }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CdfError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CdfError::Configuration(alloc::format!("{name} = {v} must be positive and finite")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    /// `α = α₀`.
    Constant(f64),
    /// `α(u) = ρ·c_v/(2γ·u³)`.
    Thermomass { rho: f64, gamma: f64 },
}

/// Generalized Cattaneo system.
#[derive(Debug, Clone)]
pub struct CattaneoSystem {
    pub cv: f64,
    pub lambda: f64,
    pub relaxation: Relaxation,
    ue: Vec<f64>,
}

/// Classical Cattaneo law with `α₀ = τ₀/(λ·T_e²)`.
pub fn cattaneo_system(p: &CattaneoParams) -> Result<CattaneoSystem, CdfError> {
    positive("tau0", p.tau0)?;
    positive("lambda", p.lambda)?;
    positive("cv", p.cv)?;
    positive("t_e", p.t_e)?;
    let alpha0 = p.tau0 / (p.lambda * p.t_e * p.t_e);
    Ok(CattaneoSystem { cv: p.cv, lambda: p.lambda, relaxation: Relaxation::Constant(alpha0), ue: vec![p.cv * p.t_e, 0.0] })
}

pub fn thermomass_system(p: &ThermomassParams) -> Result<CattaneoSystem, CdfError> {
    positive("rho", p.rho)?;
    positive("cv", p.cv)?;
    positive("gamma", p.gamma)?;
    positive("lambda", p.lambda)?;
    positive("t_e", p.t_e)?;
    Ok(CattaneoSystem {
        cv: p.cv,
        lambda: p.lambda,
        relaxation: Relaxation::Thermomass { rho: p.rho, gamma: p.gamma },
        ue: vec![p.cv * p.t_e, 0.0],
    })
}

/// Entropy derivatives at one state.
struct Partials {
    s_u: f64,
    s_w: f64,
    s_uu: f64,
    s_uw: f64,
    s_ww: f64,
}

impl CattaneoSystem {
    pub fn alpha(&self, u: f64) -> f64 {
        match self.relaxation {
            Relaxation::Constant(a) => a,
            Relaxation::Thermomass { rho, gamma } => rho * self.cv / (2.0 * gamma * u * u * u),
        }
    }

    /// `g = 1/(2α)` and its first two derivatives in `u`.
    fn g(&self, u: f64) -> (f64, f64, f64) {
        match self.relaxation {
            Relaxation::Constant(a) => (0.5 / a, 0.0, 0.0),
            Relaxation::Thermomass { rho, gamma } => {
                let k = gamma / (rho * self.cv);
                (k * u * u * u, 3.0 * k * u * u, 6.0 * k * u)
            }
        }
    }

    fn partials(&self, u: &[f64]) -> Partials {
        let (e, w) = (u[0], u[1]);
        let (g, g1, g2) = self.g(e);
        Partials {
            s_u: self.cv / e - g1 * w * w,
            s_w: -2.0 * g * w,
            s_uu: -self.cv / (e * e) - g2 * w * w,
            s_uw: -2.0 * g1 * w,
            s_ww: -2.0 * g,
        }
    }

    /// Equilibrium temperature `T = u/c_v`.
    pub fn temperature(&self, u: f64) -> f64 {
        u / self.cv
    }

    /// `θ = 1/s_u`.
    pub fn noneq_temperature(&self, u: &[f64]) -> f64 {
        1.0 / self.partials(u).s_u
    }

    /// `q = s_w`.
    pub fn heat_flux(&self, u: &[f64]) -> f64 {
        self.partials(u).s_w
    }

    /// `M = 1/(λ·T²)`.
    pub fn mobility(&self, u: f64) -> f64 {
        let t = self.temperature(u);
        1.0 / (self.lambda * t * t)
    }

    /// Linearized signal speed at the equilibrium.
    pub fn equilibrium_speed(&self) -> f64 {
        let p = self.partials(&self.ue);
        p.s_uw.abs() + libm::sqrt(p.s_uu * p.s_ww)
    }
}

impl BalanceLaw for CattaneoSystem {
    fn layout(&self) -> Layout {
        Layout::new(1, 1)
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let p = self.partials(u);
        out[0] = p.s_w;
        out[1] = p.s_u;
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        let p = self.partials(u);
        out[0] = 0.0;
        out[1] = self.mobility(u[0]) * p.s_w;
    }

    fn equilibrium(&self) -> &[f64] {
        &self.ue
    }

    fn flux_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let p = self.partials(u);
        Some(Mat::from_row_slice(2, 2, &[p.s_uw, p.s_ww, p.s_uu, p.s_uw]))
    }

    fn source_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let p = self.partials(u);
        let m = self.mobility(u[0]);
        let dm = -2.0 * m / u[0];
        Some(Mat::from_row_slice(2, 2, &[0.0, 0.0, dm * p.s_w + m * p.s_uw, m * p.s_ww]))
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        let p = self.partials(u);
        let det = p.s_uu * p.s_ww;
        (det >= 0.0).then(|| p.s_uw.abs() + libm::sqrt(det))
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        if u[0] > 0.0 && u.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(CdfError::Domain { state: u.to_vec(), reason: "internal energy must be positive".into() })
        }
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for CattaneoSystem {
    fn entropy(&self, u: &[f64]) -> f64 {
        let (g, _, _) = self.g(u[0]);
        self.cv * libm::log(u[0]) - g * u[1] * u[1]
    }

    fn orientation(&self) -> Orientation {
        Orientation::Concave
    }

    fn dissipation(&self, u: &[f64]) -> Mat {
        Mat::from_element(1, 1, self.mobility(u[0]))
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let p = self.partials(u);
        Some(Vector::from_vec(vec![p.s_u, p.s_w]))
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let p = self.partials(u);
        Some(Mat::from_row_slice(2, 2, &[p.s_uu, p.s_uw, p.s_uw, p.s_ww]))
    }

    fn entropy_flux(&self, u: &[f64]) -> Option<f64> {
        let p = self.partials(u);
        Some(p.s_u * p.s_w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FourierMethod {
    /// Exact evolution of every discrete Fourier mode.
    #[default]
    Spectral,
    /// Split finite-volume solver on the linear `(u, q)` system.
    FiniteVolume,
}

/// Cattaneo versus heat equation on a periodic domain `[−L/2, L/2]` with a
/// Gaussian initial temperature `T_e + A·exp(−x²/(2σ²))` and the
/// well-prepared flux `q₀ = −λ·T₀ₓ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FourierLimitConfig {
    pub cv: f64,
    pub lambda: f64,
    pub t_e: f64,
    pub taus: Vec<f64>,
    pub cells: usize,
    pub length: f64,
    pub width: f64,
    pub amplitude: f64,
    pub end_time: f64,
    pub method: FourierMethod,
    pub cfl: f64,
}

impl Default for FourierLimitConfig {
    fn default() -> Self {
        Self {
            cv: 1.0,
            lambda: 1.0,
            t_e: 1.0,
            taus: vec![1e-1, 1e-2, 1e-3, 1e-4],
            cells: 400,
            length: 10.0,
            width: 0.5,
            amplitude: 0.5,
            end_time: 0.5,
            method: FourierMethod::Spectral,
            cfl: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierLimitRow {
    pub tau: f64,
    /// L² distance between the two internal-energy fields.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierLimitReport {
    pub rows: Vec<FourierLimitRow>,
    /// Log-log slope of error against `τ`; absent with fewer than two
    /// positive errors.
    pub slope: Option<f64>,
    pub monotone: bool,
}

/// Real discrete Fourier coefficients `(κ, a, b)` with
/// `f(x_j) = Σ a·cos(κx_j) + b·sin(κx_j)`.
fn real_dft(x: &[f64], f: &[f64], length: f64) -> Vec<(f64, f64, f64)> {
    let n = f.len();
    let mut out = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let kappa = 2.0 * core::f64::consts::PI * k as f64 / length;
        let (mut a, mut b) = (0.0, 0.0);
        for (xj, fj) in x.iter().zip(f) {
            let (s, c) = libm::sincos(kappa * xj);
            a += fj * c;
            b += fj * s;
        }
        let edge = k == 0 || (n % 2 == 0 && k == n / 2);
        let w = if edge { 1.0 / n as f64 } else { 2.0 / n as f64 };
        out.push((kappa, a * w, if edge { 0.0 } else { b * w }));
    }
    out
}

fn synthesize(x: &[f64], modes: &[(f64, f64, f64)]) -> Vec<f64> {
    x.iter()
        .map(|&xj| {
            modes
                .iter()
                .map(|&(k, a, b)| {
                    let (s, c) = libm::sincos(k * xj);
                    a * c + b * s
                })
                .sum()
        })
        .collect()
}

impl FourierLimitConfig {
    fn validate(&self) -> Result<(), CdfError> {
        positive("cv", self.cv)?;
        positive("lambda", self.lambda)?;
        positive("length", self.length)?;
        positive("width", self.width)?;
        if self.cells < 4 {
            return Err(CdfError::Configuration("need at least 4 cells".into()));
        }
        if !(self.end_time >= 0.0) {
            return Err(CdfError::Configuration("end time must be nonnegative".into()));
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(CdfError::Configuration("relaxation times must be positive".into()));
        }
        if self.taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CdfError::Configuration("relaxation times must be strictly decreasing".into()));
        }
        Ok(())
    }

    fn grid(&self) -> Result<Grid1D, CdfError> {
        Grid1D::periodic(-0.5 * self.length, 0.5 * self.length, self.cells)
    }

    fn initial_temperature(&self, x: f64) -> f64 {
        self.t_e + self.amplitude * libm::exp(-x * x / (2.0 * self.width * self.width))
    }

    /// Modes of the initial temperature; the background `T_e` is added to
    /// the mean exactly so that a flat profile has no other content.
    fn initial_modes(&self, x: &[f64]) -> Vec<(f64, f64, f64)> {
        let bump: Vec<f64> = x.iter().map(|&xi| self.initial_temperature(xi) - self.t_e).collect();
        let mut modes = real_dft(x, &bump, self.length);
        modes[0].1 += self.t_e;
        modes
    }

    /// Internal energy of the heat-equation solution at `end_time`.
    pub fn heat_solution(&self) -> Result<Vec<f64>, CdfError> {
        self.validate()?;
        let x = self.grid()?.centers();
        let d = self.lambda / self.cv;
        let modes: Vec<_> = self
            .initial_modes(&x)
            .into_iter()
            .map(|(k, a, b)| {
                let decay = libm::exp(-d * k * k * self.end_time);
                (k, a * decay, b * decay)
            })
            .collect();
        Ok(synthesize(&x, &modes).into_iter().map(|t| self.cv * t).collect())
    }

    /// Internal energy of the Cattaneo solution at `end_time`.
    pub fn cattaneo_solution(&self, tau: f64) -> Result<Vec<f64>, CdfError> {
        self.validate()?;
        positive("tau", tau)?;
        match self.method {
            FourierMethod::Spectral => self.spectral(tau),
            FourierMethod::FiniteVolume => self.finite_volume(tau),
        }
    }

    // Per mode, T = a·cos + b·sin and q = c·cos + d·sin give
    //   a' = −(κ/c_v)·d,  d' = (λκ/τ)·a − d/τ
    // and the same system for (b, −c).
    fn spectral(&self, tau: f64) -> Result<Vec<f64>, CdfError> {
        let x = self.grid()?.centers();
        let modes: Vec<_> = self
            .initial_modes(&x)
            .into_iter()
            .map(|(k, a, b)| {
                if k == 0.0 {
                    return (k, a, b);
                }
                let (c, d) = (-self.lambda * k * b, self.lambda * k * a);
                let gen = Mat::from_row_slice(2, 2, &[0.0, -k / self.cv, self.lambda * k / tau, -1.0 / tau]);
                let p = linalg::expm(&(gen * self.end_time));
                let a1 = p[(0, 0)] * a + p[(0, 1)] * d;
                let b1 = p[(0, 0)] * b + p[(0, 1)] * (-c);
                (k, a1, b1)
            })
            .collect();
        Ok(synthesize(&x, &modes).into_iter().map(|t| self.cv * t).collect())
    }

    fn finite_volume(&self, tau: f64) -> Result<Vec<f64>, CdfError> {
        let c2 = self.lambda / (self.cv * tau);
        let law = LinearBalanceLaw::new(
            1,
            Mat::from_row_slice(2, 2, &[0.0, 1.0, c2, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0 / tau]),
        )?
        .with_symmetrizer(Mat::from_diagonal(&Vector::from_vec(vec![c2, 1.0])))?;
        let s2 = self.width * self.width;
        let field0 = StateField::from_fn(self.grid()?, 2, |x, out| {
            let t = self.initial_temperature(x);
            out[0] = self.cv * t;
            out[1] = self.lambda * (t - self.t_e) * x / s2;
        });
        let cfg = SolverConfig {
            cfl: self.cfl,
            end_time: self.end_time,
            source_mode: SourceMode::ExactLinear,
            snapshots: 1,
            ..SolverConfig::default()
        };
        let traj = solver::integrate(&law, &field0, &cfg).map_err(|e| match e {
            SolverError::Model(m) => m,
            other => CdfError::Evaluation { state: Vec::new(), reason: alloc::format!("{other}") },
        })?;
        Ok(traj.final_field.component(0))
    }
}

/// L² distance between Cattaneo and heat solutions for each `τ`.
pub fn fourier_limit_study(cfg: &FourierLimitConfig) -> Result<FourierLimitReport, CdfError> {
    let heat = cfg.heat_solution()?;
    let dx = cfg.length / cfg.cells as f64;
    let mut rows = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let cat = cfg.cattaneo_solution(tau)?;
        let err2: f64 = cat.iter().zip(&heat).map(|(a, b)| (a - b) * (a - b)).sum();
        rows.push(FourierLimitRow { tau, error: libm::sqrt(err2 * dx) });
    }
    let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.error > 0.0).map(|r| (libm::log(r.tau), libm::log(r.error))).collect();
    let slope = (pts.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linalg::linear_fit(&xs, &ys).0
    });
    Ok(FourierLimitReport { rows, slope, monotone })
}

/// Step-front experiment for the classical law.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FrontSpeedConfig {
    pub params: CattaneoParams,
    /// Relative temperature step on `x < 0`.
    pub step: f64,
    pub x_left: f64,
    pub x_right: f64,
    pub cells: usize,
    pub time: f64,
    pub cfl: f64,
}

impl Default for FrontSpeedConfig {
    fn default() -> Self {
        Self { params: CattaneoParams::default(), step: 0.01, x_left: -0.5, x_right: 2.0, cells: 2000, time: 0.3, cfl: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrontSpeedReport {
    pub position: f64,
    pub measured_speed: f64,
    pub predicted_speed: f64,
    pub relative_error: f64,
}

/// Tracks the right-moving front of a temperature step.
///
/// The front carries a jump of `(Δu/2)·exp(−t/(2τ₀))`; its position is the
/// rightmost crossing of half that height above the undisturbed state.
pub fn cattaneo_front_speed(cfg: &FrontSpeedConfig) -> Result<FrontSpeedReport, SolverError> {
    let sys = cattaneo_system(&cfg.params)?;
    positive("time", cfg.time)?;
    if !(cfg.x_left < 0.0 && cfg.x_right > 0.0) {
        return Err(CdfError::Configuration("the step at x = 0 must lie inside the domain".into()).into());
    }
    let grid = Grid1D::new(cfg.x_left, cfg.x_right, cfg.cells, Boundary::Outflow, Boundary::Outflow)?;
    let ue = sys.ue[0];
    let du = ue * cfg.step;
    let field0 = StateField::from_fn(grid, 2, |x, out| {
        out[0] = if x < 0.0 { ue + du } else { ue };
        out[1] = 0.0;
    });
    let scfg = SolverConfig { cfl: cfg.cfl, end_time: cfg.time, snapshots: 1, ..SolverConfig::default() };
    let traj = solver::integrate(&sys, &field0, &scfg)?;
    let u = traj.final_field.component(0);
    let x = traj.final_field.grid.centers();
    let half = 0.25 * du * libm::exp(-cfg.time / (2.0 * cfg.params.tau0));
    let mut position = f64::NAN;
    for i in (0..u.len() - 1).rev() {
        let (a, b) = (u[i] - ue - half, u[i + 1] - ue - half);
        if a >= 0.0 && b < 0.0 {
            position = x[i] + (x[i + 1] - x[i]) * a / (a - b);
            break;
        }
    }
    let predicted = libm::sqrt(cfg.params.lambda / (cfg.params.cv * cfg.params.tau0));
    let measured = position / cfg.time;
    Ok(FrontSpeedReport {
        position,
        measured_speed: measured,
        predicted_speed: predicted,
        relative_error: (measured - predicted).abs() / predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermomass_alpha_at_unit_parameters() {
        let sys = thermomass_system(&ThermomassParams::default()).unwrap();
        assert_eq!(sys.alpha(1.0), 0.5);
    }

    #[test]
    fn equilibrium_speed_matches_classical_formula() {
        let p = CattaneoParams { tau0: 0.1, lambda: 2.0, cv: 3.0, t_e: 1.5 };
        let sys = cattaneo_system(&p).unwrap();
        let c = libm::sqrt(p.lambda / (p.cv * p.tau0));
        assert!((sys.equilibrium_speed() - c).abs() < 1e-12 * c);
    }

    #[test]
    fn thermomass_temperature_correction() {
        let p = ThermomassParams { rho: 2.0, cv: 1.5, gamma: 1.3, lambda: 1.0, t_e: 1.0 };
        let sys = thermomass_system(&p).unwrap();
        let (u, w) = (1.2, 0.05);
        let expected = 1.0 / (u / p.cv) - 3.0 * p.gamma * w * w * u * u / (p.rho * p.cv);
        assert!((1.0 / sys.noneq_temperature(&[u, w]) - expected).abs() < 1e-12);
    }
}
