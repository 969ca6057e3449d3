//! Plane-wave stability of `A·U_t + A₁·U_x = B·U`.
//!
//! A mode `e^{ikx + λt}` exists iff `λ` is an eigenvalue of `A⁻¹(B − ik·A₁)`;
//! any `Re λ > 0` produces exponentially exploding solutions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::CdfError;
use crate::field::{Grid1D, StateField};
use crate::linalg::{self, Mat};
use crate::solver::{self, SolverConfig, SolverError, SourceMode};
use crate::system::LinearBalanceLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemSpec {
    pub a: Mat,
    pub a1: Mat,
    pub b: Mat,
    a_inv: Mat,
    condition: f64,
}

impl LinearSystemSpec {
    pub fn new(a: Mat, a1: Mat, b: Mat) -> Result<Self, CdfError> {
        let d = a.nrows();
        if a.shape() != (d, d) || a1.shape() != (d, d) || b.shape() != (d, d) || d == 0 {
            return Err(CdfError::Configuration("A, A₁ and B must be square of equal size".into()));
        }
        let sv = a.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-14 * smax.max(f64::MIN_POSITIVE)) {
            return Err(CdfError::Configuration(format!("A is singular (σ_min = {smin:e})")));
        }
        let a_inv = a.clone().try_inverse().ok_or_else(|| CdfError::Configuration("A is singular".into()))?;
        Ok(Self { a, a1, b, a_inv, condition: smax / smin })
    }

    /// `u_t + v_x = 0`, `v_t + u_x = −v`.
    pub fn damped_telegraph() -> Self {
        Self::telegraph(-1.0)
    }

    /// `u_t + v_x = 0`, `v_t + u_x = +v`.
    pub fn anti_damped_telegraph() -> Self {
        Self::telegraph(1.0)
    }

    fn telegraph(rate: f64) -> Self {
        Self::new(
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, rate]),
        )
        .expect("identity A")
    }

    /// 2-norm condition number of `A`.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The same system as `U_t + (A⁻¹A₁·U)_x = A⁻¹B·U`. Leading zero rows of
    /// `A⁻¹B` form the conserved block.
    pub fn balance_law(&self) -> Result<LinearBalanceLaw, CdfError> {
        let flux = &self.a_inv * &self.a1;
        let source = &self.a_inv * &self.b;
        let conserved = (0..self.dim()).take_while(|&i| source.row(i).iter().all(|v| *v == 0.0)).count();
        LinearBalanceLaw::new(conserved, flux, source)
    }

    /// Eigenvalues of `A⁻¹(B − ik·A₁)`, sorted by decreasing real part.
    pub fn modes(&self, k: f64) -> Result<Vec<Complex64>, CdfError> {
        let d = self.dim();
        let c = DMatrix::from_fn(d, d, |i, j| Complex64::new(self.b[(i, j)], -k * self.a1[(i, j)]));
        let ainv = self.a_inv.map(|v| Complex64::new(v, 0.0));
        let m = ainv * c;
        let mut ev = linalg::complex_eigenvalues(&m);
        if ev.iter().any(|z| !z.re.is_finite()) {
            return Err(CdfError::Evaluation { state: vec![k], reason: "complex Schur iteration failed".into() });
        }
        ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
        Ok(ev)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DispersionRow {
    pub k: f64,
    /// Real parts, decreasing.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl DispersionRow {
    pub fn growth(&self) -> f64 {
        self.re.first().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

pub fn dispersion_spectrum(spec: &LinearSystemSpec, wavenumbers: &[f64]) -> Result<Vec<DispersionRow>, CdfError> {
    wavenumbers
        .iter()
        .map(|&k| {
            let ev = spec.modes(k)?;
            Ok(DispersionRow { k, re: ev.iter().map(|z| z.re).collect(), im: ev.iter().map(|z| z.im).collect() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Classification {
    pub stable: bool,
    pub max_growth: f64,
    pub k_at_max: f64,
}

/// Stable iff `max Re λ(k) ≤ tol` over the rows.
pub fn classify(rows: &[DispersionRow], tol: f64) -> Classification {
    let (mut g, mut k) = (f64::NEG_INFINITY, f64::NAN);
    for r in rows {
        if r.growth() > g {
            g = r.growth();
            k = r.k;
        }
    }
    Classification { stable: g <= tol, max_growth: g, k_at_max: k }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GrowthConfig {
    pub x_left: f64,
    pub x_right: f64,
    pub cells: usize,
    pub horizon: f64,
    /// Width of the Gaussian initial profile, placed in every component.
    pub width: f64,
    pub cfl: f64,
    pub samples: usize,
    /// Fraction of the horizon discarded before fitting.
    pub discard: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self { x_left: -500.0, x_right: 500.0, cells: 2000, horizon: 10.0, width: 10.0, cfl: 0.9, samples: 101, discard: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthRun {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    /// Slope of `ln‖U‖` over the fitting window.
    pub rate: f64,
    pub fit_residual: f64,
}

/// Periodic time-domain run from a Gaussian profile, recording `‖U‖_{L²}`.
pub fn time_domain_growth(spec: &LinearSystemSpec, cfg: &GrowthConfig) -> Result<GrowthRun, SolverError> {
    let law = spec.balance_law()?;
    let grid = Grid1D::periodic(cfg.x_left, cfg.x_right, cfg.cells)?;
    let mid = 0.5 * (cfg.x_left + cfg.x_right);
    let d = spec.dim();
    let mut field = StateField::from_fn(grid, d, |x, out| {
        out.fill(libm::exp(-(x - mid) * (x - mid) / (2.0 * cfg.width * cfg.width)));
    });
    let zero = vec![0.0; d];
    let samples = cfg.samples.max(3);
    let chunk = cfg.horizon / (samples - 1) as f64;
    let scfg = SolverConfig {
        cfl: cfg.cfl,
        end_time: chunk,
        source_mode: SourceMode::ExactLinear,
        snapshots: 1,
        ..SolverConfig::default()
    };
    let mut times = vec![0.0];
    let mut l2 = vec![crate::field::l2_to_state(&field, &zero)];
    for k in 1..samples {
        field = solver::integrate(&law, &field, &scfg)?.final_field;
        times.push(chunk * k as f64);
        l2.push(crate::field::l2_to_state(&field, &zero));
    }
    let start = cfg.discard.clamp(0.0, 0.9) * cfg.horizon;
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&l2).filter(|(t, n)| **t >= start - 1e-12 && **n > 0.0).map(|(t, n)| (*t, libm::log(*n))).unzip();
    let (rate, _, fit_residual) = if xs.len() >= 2 { linalg::linear_fit(&xs, &ys) } else { (f64::NAN, f64::NAN, f64::NAN) };
    Ok(GrowthRun { times, l2, rate, fit_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_wavenumber_gives_source_spectrum() {
        let spec = LinearSystemSpec::damped_telegraph();
        let ev = spec.modes(0.0).unwrap();
        assert!((ev[0].re - 0.0).abs() < 1e-14 && (ev[1].re + 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_a_is_rejected() {
        let z = Mat::zeros(2, 2);
        assert!(LinearSystemSpec::new(z.clone(), z.clone(), z).is_err());
    }
}
