//! Linear reaction-hyperbolic model of axonal transport,
//! `U_t + Λ·U_x = K·U/ε` on `x ≥ 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;
use crate::field::{Boundary, Grid1D, StateField};
use crate::linalg::{self, Mat, Vector};
use crate::solver::{self, SolverConfig, SolverError, SourceMode};
use crate::stochastic::communicating_classes;
use crate::system::LinearBalanceLaw;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AxonalParams {
    /// Transport velocities `λ_i`.
    pub velocities: Vec<f64>,
    /// Row-major `N × N` coupling matrix `K`.
    pub coupling: Vec<f64>,
    /// Boundary value `U₀(0)`.
    pub boundary: Vec<f64>,
    pub epsilon: f64,
}

impl Default for AxonalParams {
    fn default() -> Self {
        Self::two_population()
    }
}

impl AxonalParams {
    /// Two populations with `Λ = diag(1, 2)`, `K = [[−1, 1], [1, −1]]`,
    /// `U₀(0) = (1, 1)`.
    pub fn two_population() -> Self {
        Self { velocities: vec![1.0, 2.0], coupling: vec![-1.0, 1.0, 1.0, -1.0], boundary: vec![1.0, 1.0], epsilon: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.velocities.len()
    }

    pub fn k_matrix(&self) -> Mat {
        let n = self.n();
        Mat::from_row_slice(n, n, &self.coupling)
    }

    pub fn lambda_matrix(&self) -> Mat {
        Mat::from_diagonal(&Vector::from_column_slice(&self.velocities))
    }

    /// Checks the sign, column-sum, irreducibility and distinct-speed
    /// assumptions, plus the shapes and `ε > 0`.
    pub fn validate(&self) -> Result<(), CdfError> {
        let n = self.n();
        if n == 0 || self.coupling.len() != n * n || self.boundary.len() != n {
            return Err(CdfError::Configuration(format!(
                "{n} velocities need an {n}×{n} coupling and {n} boundary values"
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(CdfError::Configuration(format!("ε = {} must be positive", self.epsilon)));
        }
        if self.velocities.iter().any(|l| *l == 0.0 || !l.is_finite()) {
            return Err(CdfError::Structural("velocities must be nonzero so that Λ is invertible".into()));
        }
        let k = self.k_matrix();
        let scale = linalg::max_abs(&k).max(1.0);
        for j in 0..n {
            for i in 0..n {
                if i != j && k[(i, j)] < 0.0 {
                    return Err(CdfError::Structural(format!("off-diagonal coupling k[{i}][{j}] = {} is negative", k[(i, j)])));
                }
            }
            let col: f64 = (0..n).map(|i| k[(i, j)]).sum();
            if col.abs() > 1e-12 * scale {
                return Err(CdfError::Structural(format!("column {j} of K sums to {col:e}, not zero")));
            }
        }
        let classes = communicating_classes(&k);
        if classes.len() > 1 {
            return Err(CdfError::Structural(format!("K is reducible; communicating classes {classes:?}")));
        }
        let l0 = self.velocities[0];
        if self.velocities.iter().all(|l| *l == l0) {
            return Err(CdfError::Structural("all transport velocities coincide".into()));
        }
        Ok(())
    }
}

/// `F = Λ·U`, `Q = K·U/ε`. Every row relaxes, so the conserved block is
/// empty.
pub fn axonal_system(p: &AxonalParams) -> Result<LinearBalanceLaw, CdfError> {
    p.validate()?;
    LinearBalanceLaw::new(0, p.lambda_matrix(), p.k_matrix() / p.epsilon)
}

/// `B(x) = Λ⁻¹·exp(K·Λ⁻¹·x/ε)·Λ·U₀(0)`.
pub fn axonal_steady_state(p: &AxonalParams, x: f64) -> Result<Vector, CdfError> {
    p.validate()?;
    Ok(steady(p, x))
}

fn steady(p: &AxonalParams, x: f64) -> Vector {
    let inv = Vector::from_iterator(p.n(), p.velocities.iter().map(|l| 1.0 / l));
    let lam_inv = Mat::from_diagonal(&inv);
    let gen = p.k_matrix() * &lam_inv * (x / p.epsilon);
    let lu0 = p.lambda_matrix() * Vector::from_column_slice(&p.boundary);
    lam_inv * linalg::expm(&gen) * lu0
}

/// Largest residual of `Λ·B_x − K·B/ε` over `xs`, with `B_x` from central
/// differences of step `h`.
pub fn steady_state_residual(p: &AxonalParams, xs: &[f64], h: f64) -> Result<f64, CdfError> {
    p.validate()?;
    let (lam, k) = (p.lambda_matrix(), p.k_matrix());
    let mut worst: f64 = 0.0;
    for &x in xs {
        let bx = (steady(p, x + h) - steady(p, x - h)) / (2.0 * h);
        let r = &lam * bx - &k * steady(p, x) / p.epsilon;
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AxonalRunConfig {
    pub length: f64,
    pub cells: usize,
    pub horizon: f64,
    pub cfl: f64,
    /// Amplitude of the bump added to `B(x)` at `t = 0`.
    pub perturbation: f64,
    /// Bump centre; it vanishes near `x = 0` so the compatibility
    /// condition at the boundary is kept.
    pub center: f64,
    pub width: f64,
    pub samples: usize,
}

impl Default for AxonalRunConfig {
    fn default() -> Self {
        Self { length: 10.0, cells: 200, horizon: 30.0, cfl: 0.9, perturbation: 0.5, center: 3.0, width: 0.5, samples: 61 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxonalRun {
    pub times: Vec<f64>,
    /// `sup_x |U(x, t) − B(x)|` at each sample time.
    pub sup_distance: Vec<f64>,
}

/// Integrates from `B + bump` with Dirichlet inflow `U₀(0)` at `x = 0` and
/// outflow at `x = L`, recording the sup-norm distance to `B`.
///
/// All velocities must be positive so that every characteristic enters at
/// the left boundary.
pub fn axonal_relaxation(p: &AxonalParams, run: &AxonalRunConfig) -> Result<AxonalRun, SolverError> {
    let sys = axonal_system(p)?;
    if p.velocities.iter().any(|l| *l <= 0.0) {
        return Err(CdfError::Configuration("inflow at x = 0 needs positive velocities".into()).into());
    }
    let grid = Grid1D::new(0.0, run.length, run.cells, Boundary::Dirichlet(p.boundary.clone()), Boundary::Outflow)?;
    let n = p.n();
    let b: Vec<Vector> = grid.centers().iter().map(|&x| steady(p, x)).collect();
    let mut field = StateField::from_fn(grid, n, |x, out| {
        let s = steady(p, x);
        let bump = run.perturbation * libm::exp(-(x - run.center) * (x - run.center) / (2.0 * run.width * run.width));
        for (i, o) in out.iter_mut().enumerate() {
            *o = s[i] + bump * (1.0 + 0.5 * i as f64);
        }
    });
    let sup = |f: &StateField| {
        f.cells().zip(&b).map(|(u, bi)| u.iter().zip(bi.iter()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max)).fold(0.0, f64::max)
    };
    let samples = run.samples.max(2);
    let chunk = run.horizon / (samples - 1) as f64;
    let cfg = SolverConfig {
        cfl: run.cfl,
        end_time: chunk,
        source_mode: SourceMode::ExactLinear,
        snapshots: 1,
        ..SolverConfig::default()
    };
    let mut out = AxonalRun { times: vec![0.0], sup_distance: vec![sup(&field)] };
    for k in 1..samples {
        field = solver::integrate(&sys, &field, &cfg)?.final_field;
        out.times.push(chunk * k as f64);
        out.sup_distance.push(sup(&field));
    }
    Ok(out)
}
