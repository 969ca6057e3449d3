//! Feedback boundary stabilization of linear hyperbolic balance laws
//!
//! ```text
//! U = (y, z),   U_t + (A·U)_x = (0, −e·z),   A = [[a, b], [c, d]]
//! ```
//!
//! on a bounded interval, with assumption checks on a block-diagonal
//! symmetrizer `A₀ = blockdiag(X₁, X₂)` and characteristic reflection at the
//! controlled ends.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::checks::Verdict;
use crate::error::CdfError;
use crate::field::{Boundary, GhostRule, Grid1D, StateField};
use crate::linalg::{self, Mat, Vector};
use crate::solver::{self, SolverConfig, SolverError};
use crate::system::LinearBalanceLaw;

/// Residual bound on the symmetry of `A₀·A`.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues of `A` below this (relative to `‖A‖`) count as zero speeds.
pub const ZERO_SPEED_TOL: f64 = 1e-10;
/// Norms below this are treated as round-off in [`fit_decay_rate`].
pub const NORM_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    n: usize,
    a: Mat,
    e: Mat,
    a0: Mat,
}

impl ControlSystem {
    /// Assembles `A` and `A₀` from their blocks. `a` is `n×n`, `d` and `e`
    /// are `m×m`.
    pub fn from_blocks(a: Mat, b: Mat, c: Mat, d: Mat, e: Mat, x1: Mat, x2: Mat) -> Result<Self, CdfError> {
        let (n, m) = (a.nrows(), d.nrows());
        let shapes = [
            (a.shape(), (n, n)),
            (b.shape(), (n, m)),
            (c.shape(), (m, n)),
            (d.shape(), (m, m)),
            (e.shape(), (m, m)),
            (x1.shape(), (n, n)),
            (x2.shape(), (m, m)),
        ];
        if n + m == 0 || shapes.iter().any(|(s, t)| s != t) {
            return Err(CdfError::Configuration("inconsistent block sizes".into()));
        }
        let mut full = Mat::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(&a);
        full.view_mut((0, n), (n, m)).copy_from(&b);
        full.view_mut((n, 0), (m, n)).copy_from(&c);
        full.view_mut((n, n), (m, m)).copy_from(&d);
        let mut a0 = Mat::zeros(n + m, n + m);
        a0.view_mut((0, 0), (n, n)).copy_from(&x1);
        a0.view_mut((n, n), (m, m)).copy_from(&x2);
        Ok(Self { n, a: full, e, a0 })
    }

    /// `y_t + z_x = 0`, `z_t + y_x = −e·z` with `A₀ = I`.
    pub fn jin_xin(e: f64) -> Self {
        let one = Mat::identity(1, 1);
        Self::from_blocks(
            Mat::zeros(1, 1),
            one.clone(),
            one.clone(),
            Mat::zeros(1, 1),
            Mat::from_element(1, 1, e),
            one.clone(),
            one,
        )
        .expect("scalar blocks")
    }

    pub fn conserved(&self) -> usize {
        self.n
    }

    pub fn dissipative(&self) -> usize {
        self.e.nrows()
    }

    pub fn flux_matrix(&self) -> &Mat {
        &self.a
    }

    pub fn damping(&self) -> &Mat {
        &self.e
    }

    pub fn symmetrizer(&self) -> &Mat {
        &self.a0
    }

    fn block_a(&self) -> Mat {
        self.a.view((0, 0), (self.n, self.n)).into_owned()
    }

    fn x2(&self) -> Mat {
        let m = self.dissipative();
        self.a0.view((self.n, self.n), (m, m)).into_owned()
    }

    /// The system as a [`LinearBalanceLaw`] with source `blockdiag(0, −e)`.
    pub fn balance_law(&self) -> Result<LinearBalanceLaw, CdfError> {
        let d = self.a.nrows();
        let mut src = Mat::zeros(d, d);
        src.view_mut((self.n, self.n), (self.dissipative(), self.dissipative())).copy_from(&(-&self.e));
        LinearBalanceLaw::new(self.n, self.a.clone(), src)?.with_symmetrizer(self.a0.clone())
    }

    /// True when `A` has an eigenvalue of modulus at most
    /// `ZERO_SPEED_TOL·max(1, ‖A‖)`.
    pub fn is_characteristic(&self) -> bool {
        let scale = linalg::max_abs(&self.a).max(1.0);
        linalg::eigenvalues(&self.a).iter().any(|z| z.norm() <= ZERO_SPEED_TOL * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Assumption {
    A1,
    A2,
    A3,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub verdict: Verdict,
    /// Eigenvalues backing the verdict (real parts for `a`).
    pub witness: Vec<f64>,
    pub residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssumptionReport {
    pub a1: AssumptionCheck,
    pub a2: AssumptionCheck,
    /// `NotApplicable` unless `A` has a zero eigenvalue.
    pub a3: AssumptionCheck,
}

impl AssumptionReport {
    /// No assumption failed.
    pub fn passed(&self) -> bool {
        [&self.a1, &self.a2, &self.a3].iter().all(|c| matches!(c.verdict, Verdict::Pass | Verdict::NotApplicable))
    }

    pub fn checks(&self) -> [&AssumptionCheck; 3] {
        [&self.a1, &self.a2, &self.a3]
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn check_assumptions(sys: &ControlSystem) -> AssumptionReport {
    let a0_asym = linalg::asymmetry(&sys.a0);
    let a0_eigs = linalg::symmetric_eigenvalues(&sys.a0);
    let prod = &sys.a0 * &sys.a;
    let prod_asym = linalg::asymmetry(&prod) / linalg::max_abs(&prod).max(1.0);
    let a0_min = a0_eigs.first().copied().unwrap_or(f64::NAN);
    let a1_ok = a0_asym <= SYMMETRY_TOL * linalg::max_abs(&sys.a0).max(1.0) && a0_min > 0.0 && prod_asym <= SYMMETRY_TOL;
    let a1 = AssumptionCheck {
        assumption: Assumption::A1,
        verdict: verdict(a1_ok),
        witness: a0_eigs,
        residual: prod_asym.max(a0_asym),
        detail: format!("λ_min(A₀) = {a0_min:e}, asymmetry of A₀A = {prod_asym:e}"),
    };

    let x2 = sys.x2();
    let form = &x2 * &sys.e + sys.e.transpose() * &x2;
    let form_eigs = linalg::symmetric_eigenvalues(&form);
    let form_min = form_eigs.first().copied().unwrap_or(f64::INFINITY);
    let a2 = AssumptionCheck {
        assumption: Assumption::A2,
        verdict: verdict(form_min > 0.0),
        witness: form_eigs,
        residual: form_min,
        detail: format!("λ_min(X₂e + eᵀX₂) = {form_min:e}"),
    };

    let a3 = if sys.is_characteristic() {
        let mut re: Vec<f64> = linalg::eigenvalues(&sys.block_a()).iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        let min = re.first().copied().unwrap_or(f64::INFINITY);
        AssumptionCheck {
            assumption: Assumption::A3,
            verdict: verdict(min > ZERO_SPEED_TOL * linalg::max_abs(&sys.a).max(1.0)),
            witness: re,
            residual: min,
            detail: format!("min Re λ(a) = {min:e}"),
        }
    } else {
        AssumptionCheck {
            assumption: Assumption::A3,
            verdict: Verdict::NotApplicable,
            witness: Vec::new(),
            residual: f64::NAN,
            detail: "A has no zero eigenvalue".into(),
        }
    };
    AssumptionReport { a1, a2, a3 }
}

/// Reflection gains at one end, one per incoming characteristic ordered by
/// decreasing speed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BoundaryFeedback {
    pub gains: Vec<f64>,
}

impl BoundaryFeedback {
    /// The same gain on every incoming characteristic.
    pub fn uniform(gain: f64) -> Self {
        Self { gains: vec![gain] }
    }

    fn gain(&self, k: usize) -> f64 {
        match self.gains.len() {
            0 => 0.0,
            1 => self.gains[0],
            _ => self.gains.get(k).copied().unwrap_or(0.0),
        }
    }
}

/// Per-side control. `None` leaves that end as zeroth-order outflow.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ControlGains {
    pub left: Option<BoundaryFeedback>,
    pub right: Option<BoundaryFeedback>,
}

impl ControlGains {
    pub fn both(gain: f64) -> Self {
        Self { left: Some(BoundaryFeedback::uniform(gain)), right: Some(BoundaryFeedback::uniform(gain)) }
    }

    /// Every gain must have modulus below one.
    pub fn validate(&self) -> Result<(), CdfError> {
        for (side, fb) in [("left", &self.left), ("right", &self.right)] {
            if let Some(fb) = fb {
                if let Some(g) = fb.gains.iter().find(|g| !(g.abs() < 1.0)) {
                    return Err(CdfError::Configuration(format!("{side} reflection gain {g} has modulus ≥ 1")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

/// Characteristic reflection. With `A₀^{1/2}·A·A₀^{-1/2} = QΛQᵀ` the
/// amplitudes are `w = Qᵀ·A₀^{1/2}·U`; each incoming amplitude is set to
/// `g·√(|λ_out|/|λ_in|)·w_out`, so the boundary energy flux shrinks by `g²`.
struct CharacteristicFeedback {
    /// Rows: left eigenvectors `Qᵀ·A₀^{1/2}`.
    left: Mat,
    /// Columns: right eigenvectors `A₀^{-1/2}·Q`.
    right: Mat,
    /// `(incoming, outgoing or None, coefficient)`.
    pairs: Vec<(usize, Option<usize>, f64)>,
}

impl CharacteristicFeedback {
    fn new(sys: &ControlSystem, side: Side, fb: &BoundaryFeedback) -> Self {
        let eig = sys.a0.clone().symmetric_eigen();
        let sqrt = Vector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| libm::sqrt(*v)));
        let half = &eig.eigenvectors * Mat::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
        let inv_half = &eig.eigenvectors * Mat::from_diagonal(&sqrt.map(|v| 1.0 / v)) * eig.eigenvectors.transpose();
        let s = linalg::symmetric_part(&(&half * &sys.a * &inv_half));
        let se = s.symmetric_eigen();
        let (q, lam) = (se.eigenvectors, se.eigenvalues);
        let tol = ZERO_SPEED_TOL * linalg::max_abs(&sys.a).max(1.0);
        let inward = |l: f64| match side {
            Side::Left => l > tol,
            Side::Right => l < -tol,
        };
        let outward = |l: f64| match side {
            Side::Left => l < -tol,
            Side::Right => l > tol,
        };
        let mut inc: Vec<usize> = (0..lam.len()).filter(|&i| inward(lam[i])).collect();
        let mut out: Vec<usize> = (0..lam.len()).filter(|&i| outward(lam[i])).collect();
        inc.sort_by(|&i, &j| lam[j].abs().total_cmp(&lam[i].abs()));
        out.sort_by(|&i, &j| lam[j].abs().total_cmp(&lam[i].abs()));
        let pairs = inc
            .iter()
            .enumerate()
            .map(|(k, &i)| match out.get(k) {
                Some(&o) => (i, Some(o), fb.gain(k) * libm::sqrt(lam[o].abs() / lam[i].abs())),
                None => (i, None, 0.0),
            })
            .collect();
        Self { left: q.transpose() * &half, right: inv_half * q, pairs }
    }
}

impl GhostRule for CharacteristicFeedback {
    fn ghost(&self, interior: &[f64], _time: f64, out: &mut [f64]) {
        let w = &self.left * Vector::from_column_slice(interior);
        let mut g = w.clone();
        for &(i, o, coeff) in &self.pairs {
            g[i] = o.map_or(0.0, |o| coeff * w[o]);
        }
        out.copy_from_slice((&self.right * g).as_slice());
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlledRun {
    pub times: Vec<f64>,
    /// `‖(y, z)(t, ·)‖_{L²}` after every step.
    pub l2: Vec<f64>,
    pub steps: usize,
}

/// Integrates the controlled system on the grid of `field0`, replacing its
/// boundary kinds by `gains`. `cfg.end_time` is the horizon and
/// `cfg.epsilon` scales the damping as `e/ε`.
pub fn simulate_controlled(
    sys: &ControlSystem,
    gains: &ControlGains,
    field0: &StateField,
    cfg: &SolverConfig,
) -> Result<ControlledRun, SolverError> {
    let report = check_assumptions(sys);
    if !report.passed() {
        let failed: Vec<String> = report
            .checks()
            .iter()
            .filter(|c| c.verdict == Verdict::Fail)
            .map(|c| format!("{:?} ({})", c.assumption, c.detail))
            .collect();
        return Err(CdfError::Structural(failed.join("; ")).into());
    }
    gains.validate()?;
    let side = |fb: &Option<BoundaryFeedback>, s: Side| match fb {
        Some(fb) => Boundary::Feedback(Arc::new(CharacteristicFeedback::new(sys, s, fb))),
        None => Boundary::Outflow,
    };
    let g = &field0.grid;
    let grid = Grid1D::new(g.x_left, g.x_right, g.cells, side(&gains.left, Side::Left), side(&gains.right, Side::Right))?;
    let mut field = field0.clone();
    field.grid = grid;
    let law = sys.balance_law()?;
    let traj = solver::integrate(&law, &field, &SolverConfig { snapshots: 1, ..cfg.clone() })?;
    let (times, l2) = traj.diagnostics.iter().map(|r| (r.time, r.l2_to_equilibrium)).unzip();
    Ok(ControlledRun { times, l2, steps: traj.steps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    /// Decay rate; positive means decay.
    pub nu: f64,
    /// `C` in `‖U(t)‖ ≈ C·e^{−νt}·‖U(0)‖`.
    pub c: f64,
    /// RMS residual of the fit of `ln‖U‖` against `t`.
    pub residual: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub points: usize,
    /// The window was cut short where the norms hit [`NORM_FLOOR`].
    pub truncated: bool,
}

/// Least-squares fit of `ln‖U‖` over `t ≥ discard·(t_end − t_0) + t_0`.
pub fn fit_decay_rate(times: &[f64], norms: &[f64], discard: f64) -> Result<DecayFit, CdfError> {
    if times.len() != norms.len() || times.len() < 2 {
        return Err(CdfError::Configuration("need at least two (t, norm) pairs of equal length".into()));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let start = t0 + discard.clamp(0.0, 0.95) * (t1 - t0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut truncated = false;
    for (&t, &v) in times.iter().zip(norms) {
        if t < start - 1e-12 * t1.abs().max(1.0) {
            continue;
        }
        if !(v > NORM_FLOOR) {
            truncated = true;
            break;
        }
        xs.push(t);
        ys.push(libm::log(v));
    }
    if xs.len() < 2 {
        return Err(CdfError::Configuration(format!(
            "fewer than two norms above {NORM_FLOOR:e} in the fitting window"
        )));
    }
    let (slope, intercept, residual) = linalg::linear_fit(&xs, &ys);
    let c = if norms[0] > 0.0 { libm::exp(intercept) / norms[0] } else { f64::NAN };
    Ok(DecayFit {
        nu: -slope,
        c,
        residual,
        window_start: xs[0],
        window_end: xs[xs.len() - 1],
        points: xs.len(),
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_fit() {
        let t: Vec<f64> = (0..50).map(|k| 0.1 * k as f64).collect();
        let n: Vec<f64> = t.iter().map(|t| libm::exp(-2.0 * t)).collect();
        let fit = fit_decay_rate(&t, &n, 0.2).unwrap();
        assert!((fit.nu - 2.0).abs() < 1e-12 && fit.residual < 1e-12 && !fit.truncated);
    }

    #[test]
    fn floor_truncates() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let n: Vec<f64> = t.iter().map(|t| libm::exp(-t)).collect();
        let fit = fit_decay_rate(&t, &n, 0.0).unwrap();
        assert!(fit.truncated && fit.window_end < 33.0);
    }
}
