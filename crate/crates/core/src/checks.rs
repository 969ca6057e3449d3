//! Machine checks of the structural conditions at sampled states, plus
//! entropy-production accounting on a discretized field.
//!
//! * condition (a): the entropy Hessian is definite with the declared
//!   orientation and symmetrizes the flux Jacobian;
//! * condition (b): the dissipative source factorizes as `q = M·η_z` with the
//!   symmetric part of `M` positive semi-definite;
//! * condition (c): no eigenvector of `±F_U(U_e)` lies in `ker Q_U(U_e)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::CdfError;
use crate::field::StateField;
use crate::linalg;
use crate::system::{self, BalanceLaw, CdfSystem, DerivativeMode};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CheckConfig {
    /// Residual tolerance, scaled by the magnitude of the compared terms
    /// when those exceed one.
    pub tol: f64,
    /// Relative singular-value cut for the numerical rank of `Q_U(U_e)`.
    pub rank_rtol: f64,
    /// Rank cut used instead when `Q_U` comes from finite differences.
    pub fd_rank_rtol: f64,
    pub derivatives: DerivativeMode,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { tol: 1e-8, rank_rtol: 1e-10, fd_rank_rtol: 1e-8, derivatives: DerivativeMode::PreferAnalytic }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConditionId {
    #[cfg_attr(feature = "serde", serde(rename = "a"))]
    A,
    #[cfg_attr(feature = "serde", serde(rename = "b"))]
    B,
    #[cfg_attr(feature = "serde", serde(rename = "c"))]
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CheckKind {
    Concavity,
    Symmetrizability,
    SourceFactorization,
    Kawashima,
}

impl CheckKind {
    pub fn condition(self) -> ConditionId {
        match self {
            CheckKind::Concavity | CheckKind::Symmetrizability => ConditionId::A,
            CheckKind::SourceFactorization => ConditionId::B,
            CheckKind::Kawashima => ConditionId::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    /// Defective eigen-decomposition; the check cannot decide.
    Degenerate,
}

/// Outcome of one structural check.
///
/// `residual` is the quantity compared against `tolerance`: the worst value
/// over all samples on a pass, the offending value on a fail.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructuralReport {
    pub condition: ConditionId,
    pub check: CheckKind,
    pub verdict: Verdict,
    pub witness_state: Vec<f64>,
    /// Eigenvalues or eigenvector backing the verdict, if any.
    pub witness_vector: Vec<f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl StructuralReport {
    pub(crate) fn new(check: CheckKind, verdict: Verdict, tolerance: f64) -> Self {
        Self {
            condition: check.condition(),
            check,
            verdict,
            witness_state: Vec::new(),
            witness_vector: Vec::new(),
            residual: 0.0,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn ensure_finite(state: &[f64], what: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CdfError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(CdfError::Evaluation { state: state.to_vec(), reason: format!("non-finite {what}") })
    }
}

fn admit(sys: &dyn BalanceLaw, u: &[f64]) -> Result<(), CdfError> {
    if u.len() != sys.layout().dim() {
        return Err(CdfError::Configuration(format!(
            "sample of length {} for dimension {}",
            u.len(),
            sys.layout().dim()
        )));
    }
    sys.check_state(u)
}

/// Condition (a), first half: the Hessian `s_UU` is negative definite for a
/// concave declaration and positive definite for a convex one.
///
/// The residual is the oriented extreme eigenvalue: the largest eigenvalue for
/// a concave entropy, minus the smallest for a convex one. It must stay below
/// `−tol`.
pub fn check_concavity(sys: &dyn CdfSystem, samples: &[Vec<f64>], cfg: &CheckConfig) -> Result<StructuralReport, CdfError> {
    let sign = sys.orientation().concave_sign();
    let mut report = StructuralReport::new(CheckKind::Concavity, Verdict::Pass, cfg.tol);
    report.residual = f64::NEG_INFINITY;
    for u in samples {
        admit(sys, u)?;
        let s = sys.entropy(u);
        if !s.is_finite() {
            return Err(CdfError::InvalidSample { state: u.clone(), reason: format!("entropy evaluates to {s}") });
        }
        let h = system::entropy_hessian(sys, u, cfg.derivatives).value;
        ensure_finite(u, "entropy Hessian", h.iter().copied())?;
        let ev = linalg::symmetric_eigenvalues(&h);
        // concave-oriented Hessian must be negative definite
        let worst = ev.iter().map(|l| sign * l).fold(f64::NEG_INFINITY, f64::max);
        if worst >= -cfg.tol {
            report.verdict = Verdict::Fail;
            report.witness_state = u.clone();
            report.witness_vector = ev;
            report.residual = worst;
            report.detail = format!("Hessian eigenvalue {:e} violates {:?} orientation", sign * worst, sys.orientation());
            return Ok(report);
        }
        if worst > report.residual {
            report.residual = worst;
            report.witness_state = u.clone();
            report.witness_vector = ev;
        }
    }
    if samples.is_empty() {
        report.verdict = Verdict::NotApplicable;
        report.residual = 0.0;
    }
    Ok(report)
}

/// Condition (a), second half: `s_UU·F_U` is symmetric.
pub fn check_symmetrizability(sys: &dyn CdfSystem, samples: &[Vec<f64>], cfg: &CheckConfig) -> Result<StructuralReport, CdfError> {
    let mut report = StructuralReport::new(CheckKind::Symmetrizability, Verdict::Pass, cfg.tol);
    let mut worst_ratio = 0.0;
    for u in samples {
        admit(sys, u)?;
        let h = system::entropy_hessian(sys, u, cfg.derivatives).value;
        let j = system::flux_jacobian(sys, u, cfg.derivatives).value;
        ensure_finite(u, "entropy Hessian", h.iter().copied())?;
        ensure_finite(u, "flux Jacobian", j.iter().copied())?;
        let prod = &h * &j;
        let res = linalg::asymmetry(&prod);
        let tol = cfg.tol * (linalg::max_abs(&h) * linalg::max_abs(&j)).max(1.0);
        let ratio = res / tol;
        if ratio > worst_ratio || report.witness_state.is_empty() {
            worst_ratio = ratio;
            report.residual = res;
            report.tolerance = tol;
            report.witness_state = u.clone();
        }
        if res > tol {
            report.verdict = Verdict::Fail;
            report.detail = format!("‖s_UU·F_U − (s_UU·F_U)ᵀ‖ = {res:e}");
            return Ok(report);
        }
    }
    if samples.is_empty() {
        report.verdict = Verdict::NotApplicable;
    }
    Ok(report)
}

/// Residual and smallest symmetric eigenvalue of `q − M·η_z` at one state.
fn factorization_at(sys: &dyn CdfSystem, u: &[f64], mode: DerivativeMode) -> Result<(f64, f64, f64, Vec<f64>), CdfError> {
    let layout = sys.layout();
    let (n, m) = (layout.conserved, layout.dissipative);
    let mut q = vec![0.0; layout.dim()];
    sys.source(u, &mut q);
    let mm = sys.dissipation(u);
    if mm.shape() != (m, m) {
        return Err(CdfError::Configuration(format!(
            "dissipation matrix is {}×{}, expected {m}×{m}",
            mm.nrows(),
            mm.ncols()
        )));
    }
    let grad = system::entropy_gradient(sys, u, mode).value;
    if grad.len() != layout.dim() {
        return Err(CdfError::Configuration("entropy gradient has wrong length".into()));
    }
    ensure_finite(u, "source", q.iter().copied())?;
    ensure_finite(u, "dissipation matrix", mm.iter().copied())?;
    let sign = sys.orientation().concave_sign();
    let eta_z = grad.rows(n, m).clone_owned() * sign;
    let mq = &mm * &eta_z;
    let mut res: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for k in 0..m {
        res = res.max((q[n + k] - mq[k]).abs());
        scale = scale.max(q[n + k].abs());
    }
    let ev = linalg::symmetric_eigenvalues(&mm);
    let min_ev = ev.first().copied().unwrap_or(0.0);
    Ok((res, scale, min_ev, ev))
}

/// Condition (b): `q(U) = M(U)·η_z(U)` and `(M + Mᵀ)/2 ⪰ 0`.
pub fn check_source_factorization(sys: &dyn CdfSystem, samples: &[Vec<f64>], cfg: &CheckConfig) -> Result<StructuralReport, CdfError> {
    let mut report = StructuralReport::new(CheckKind::SourceFactorization, Verdict::Pass, cfg.tol);
    for u in samples {
        admit(sys, u)?;
        let (res, scale, min_ev, ev) = factorization_at(sys, u, cfg.derivatives)?;
        let tol = cfg.tol * scale;
        if res > tol {
            report.verdict = Verdict::Fail;
            report.witness_state = u.clone();
            report.residual = res;
            report.tolerance = tol;
            report.detail = format!("‖q − M·η_z‖ = {res:e}");
            return Ok(report);
        }
        if min_ev < -cfg.tol {
            report.verdict = Verdict::Fail;
            report.witness_state = u.clone();
            report.witness_vector = ev;
            report.residual = min_ev;
            report.detail = format!("symmetric part of M has eigenvalue {min_ev:e}");
            return Ok(report);
        }
        if res >= report.residual {
            report.residual = res;
            report.tolerance = tol;
            report.witness_state = u.clone();
        }
    }
    if samples.is_empty() {
        report.verdict = Verdict::NotApplicable;
    }
    Ok(report)
}

/// Condition (c) at `U_e`, directions `w = ±1`.
///
/// A kernel direction resonates with an eigenspace `V` of `w·F_U` when
/// `σ_min((I − P_K)V)` falls to the tolerance; the reported residual is the
/// smallest such margin.
pub fn check_kawashima(sys: &dyn BalanceLaw, cfg: &CheckConfig) -> Result<StructuralReport, CdfError> {
    let ue = sys.equilibrium().to_vec();
    let dim = ue.len();
    let qu = system::source_jacobian(sys, &ue, cfg.derivatives);
    let fu = system::flux_jacobian(sys, &ue, cfg.derivatives).value;
    ensure_finite(&ue, "source Jacobian", qu.value.iter().copied())?;
    ensure_finite(&ue, "flux Jacobian", fu.iter().copied())?;
    let rtol = if qu.finite_difference { cfg.fd_rank_rtol } else { cfg.rank_rtol };
    let kernel = linalg::null_space(&qu.value, rtol);
    let mut report = StructuralReport::new(CheckKind::Kawashima, Verdict::Pass, cfg.tol);
    report.witness_state = ue.clone();
    if kernel.ncols() == 0 {
        report.verdict = Verdict::NotApplicable;
        report.detail = "Q_U(U_e) has full rank; no conserved kernel".into();
        return Ok(report);
    }
    let kc = kernel.map(|v| Complex64::new(v, 0.0));
    let proj = DMatrix::<Complex64>::identity(dim, dim) - &kc * kc.adjoint();
    report.residual = f64::INFINITY;
    for w in [1.0, -1.0] {
        for space in linalg::eigenspaces(&(&fu * w)) {
            if space.is_defective() {
                report.verdict = Verdict::Degenerate;
                report.witness_vector = vec![space.value.re, space.value.im];
                report.detail = format!(
                    "flux Jacobian is defective at λ = {} (Jordan block of size {}, eigenspace dimension {})",
                    space.value,
                    space.algebraic,
                    space.geometric()
                );
                return Ok(report);
            }
            let outside = &proj * &space.basis;
            let svd = outside.svd(false, true);
            let v_t = svd.v_t.expect("v_t requested");
            let (k_min, sigma) = svd
                .singular_values
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, s)| if s < acc.1 { (k, s) } else { acc });
            if sigma < report.residual {
                report.residual = sigma;
            }
            if sigma <= cfg.tol {
                let coeffs = v_t.row(k_min).adjoint();
                let vec = &space.basis * coeffs;
                // rotate so the largest entry is real before reporting
                let pivot = vec.iter().copied().fold(Complex64::new(0.0, 0.0), |a, z| if z.norm() > a.norm() { z } else { a });
                let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { Complex64::new(1.0, 0.0) };
                report.verdict = Verdict::Fail;
                report.residual = sigma;
                report.witness_vector = vec.iter().map(|z| (z * phase).re).collect();
                report.detail = format!("eigenvector of {w}·F_U for λ = {} lies in ker Q_U", space.value * w);
                return Ok(report);
            }
        }
    }
    Ok(report)
}

/// Runs every structural check on `samples` (Kawashima at `U_e`).
pub fn check_all(sys: &dyn CdfSystem, samples: &[Vec<f64>], cfg: &CheckConfig) -> Result<Vec<StructuralReport>, CdfError> {
    Ok(vec![
        check_concavity(sys, samples, cfg)?,
        check_symmetrizability(sys, samples, cfg)?,
        check_source_factorization(sys, samples, cfg)?,
        check_kawashima(sys, cfg)?,
    ])
}

/// Pointwise entropy accounting on a field.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyReport {
    pub entropy_flux: Vec<f64>,
    pub production_rate: Vec<f64>,
    /// `Σ_i s(U_i)·Δx` of the declared entropy.
    pub total_entropy: f64,
    pub total_production: f64,
    /// Whether `entropy_flux` came from the closed-form potential.
    pub flux_from_potential: bool,
    /// False flags "unchecked dissipation": condition (b) failed at some cell.
    pub dissipation_verified: bool,
}

/// Entropy flux, production rate `η_z·M·η_z` and total entropy of `field`.
///
/// Without a closed-form entropy flux, `J^f` is reconstructed by summing the
/// discrete divergence `s_U·δF/δx` from the left edge.
pub fn entropy_budget(sys: &dyn CdfSystem, field: &StateField, cfg: &CheckConfig) -> Result<EntropyReport, CdfError> {
    let layout = sys.layout();
    let (n, m, dim) = (layout.conserved, layout.dissipative, layout.dim());
    if field.dim != dim {
        return Err(CdfError::Configuration(format!("field has {} components, system {dim}", field.dim)));
    }
    let dx = field.grid.dx();
    let sign = sys.orientation().concave_sign();
    let cells = field.grid.cells;
    let mut production = Vec::with_capacity(cells);
    let mut total_entropy = 0.0;
    let mut verified = true;
    for u in field.cells() {
        let grad = system::entropy_gradient(sys, u, cfg.derivatives).value;
        let eta_z = grad.rows(n, m).clone_owned() * sign;
        let mm = sys.dissipation(u);
        production.push(eta_z.dot(&(&mm * &eta_z)));
        total_entropy += sys.entropy(u) * dx;
        if verified {
            let (res, scale, min_ev, _) = factorization_at(sys, u, cfg.derivatives)?;
            verified = res <= cfg.tol * scale && min_ev >= -cfg.tol;
        }
    }
    let potential: Option<Vec<f64>> = field.cells().map(|u| sys.entropy_flux(u)).collect();
    let (entropy_flux, from_potential) = match potential {
        Some(v) => (v, true),
        None => (reconstruct_flux(sys, field, cfg.derivatives), false),
    };
    let total_production = production.iter().sum::<f64>() * dx;
    Ok(EntropyReport {
        entropy_flux,
        production_rate: production,
        total_entropy,
        total_production,
        flux_from_potential: from_potential,
        dissipation_verified: verified,
    })
}

fn reconstruct_flux(sys: &dyn CdfSystem, field: &StateField, mode: DerivativeMode) -> Vec<f64> {
    let cells = field.grid.cells;
    let dim = field.dim;
    let dx = field.grid.dx();
    let periodic = field.grid.is_periodic();
    let fluxes: Vec<Vec<f64>> = field
        .cells()
        .map(|u| {
            let mut f = vec![0.0; dim];
            sys.flux(u, &mut f);
            f
        })
        .collect();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(cells);
    for i in 0..cells {
        let (l, r) = if periodic {
            ((i + cells - 1) % cells, (i + 1) % cells)
        } else {
            (i.saturating_sub(1), (i + 1).min(cells - 1))
        };
        let span = (r as f64 - l as f64).abs().max(1.0);
        let span = if periodic { 2.0 } else { span };
        let grad = system::entropy_gradient(sys, field.cell(i), mode).value;
        let div: f64 = (0..dim).map(|k| grad[k] * (fluxes[r][k] - fluxes[l][k])).sum::<f64>() / (span * dx);
        acc += div * dx;
        out.push(acc);
    }
    out
}

/// `(Σ s·Δx, Σ η_z·M·η_z·Δx)` without the per-cell verification of
/// [`entropy_budget`].
pub fn entropy_totals(sys: &dyn CdfSystem, field: &StateField, mode: DerivativeMode) -> (f64, f64) {
    let layout = sys.layout();
    let (n, m) = (layout.conserved, layout.dissipative);
    let sign = sys.orientation().concave_sign();
    let dx = field.grid.dx();
    let mut s_tot = 0.0;
    let mut p_tot = 0.0;
    for u in field.cells() {
        s_tot += sys.entropy(u);
        let grad = system::entropy_gradient(sys, u, mode).value;
        let eta_z = grad.rows(n, m).clone_owned() * sign;
        p_tot += eta_z.dot(&(sys.dissipation(u) * &eta_z));
    }
    (s_tot * dx, p_tot * dx)
}
