//! Pointwise checks of conditions (a) and (b) for two three-dimensional
//! families that are not simulated: Euler flow coupled to radiation
//! intensities, and multi-component reactive flow.
//!
//! Fluxes are taken in the `x` direction. The dissipation matrix is the
//! rank-one realization `M = q·qᵀ/(q·η_z)`, which factorizes `q` exactly and
//! is positive semi-definite iff the production `q·η_z` is nonnegative.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::checks::{self, CheckConfig, CheckKind, StructuralReport, Verdict};
use crate::error::CdfError;
use crate::linalg::{Mat, Vector};
use crate::numdiff;
use crate::stochastic::{Reaction, ReactionNetwork};
use crate::system::{BalanceLaw, CdfSystem, Layout, Orientation};

/// User-supplied scalar closure, such as a tabulated heat capacity.
pub type Closure = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn constant(c: f64) -> Closure {
    Arc::new(move |_| c)
}

/// Euler equations of an ideal gas with `L` radiation intensities.
///
/// `U = (ρ, ρv₁, ρv₂, ρv₃, ρE, I₁, …, I_L)`; the source is
/// `(0, 0, 0, 0, Cρ·Σ(I_l − B(θ)), −ρ(I_1 − B(θ)), …)` with `B = b⁻¹`, and
/// the convex entropy is `−ρ·s₀ − C·Σ∫_{B(θ₀)}^{I_l} dy/b(y)`.
#[derive(Clone)]
pub struct RadiationParams {
    pub cv: f64,
    pub gas_constant: f64,
    /// Coupling constant `C`.
    pub coupling: f64,
    /// `x` components of the ray directions.
    pub directions: Vec<f64>,
    /// Inverse Planck map `b`.
    pub planck_inverse: Option<Closure>,
    /// `B(θ₀)`, lower end of the intensity range.
    pub planck_floor: f64,
}

/// One species of a reactive mixture.
#[derive(Clone)]
pub struct ReactiveSpecies {
    pub molar_mass: f64,
    /// Specific gas constant `r_i`.
    pub gas_constant: f64,
    /// `ε_i⁰`.
    pub energy_ref: f64,
    /// `s_i⁰`.
    pub entropy_ref: f64,
    pub heat_capacity: Option<Closure>,
}

/// Reactive mixture with state ordered
/// `U = (ρv₁, ρv₂, ρv₃, ρE, ρ₁, …, ρ_N)`, so the conserved block leads.
///
/// Partial entropies are `s_i = s_i⁰ + ∫_{θ₀}^θ c_vi(y)/y dy − r_i·ln(ρ_i/m_i)`
/// and the declared convex entropy is `−Σρ_i·s_i`. Reaction rates follow
/// mass action in the molar concentrations `ρ_i/m_i`.
#[derive(Clone)]
pub struct ReactiveFlowParams {
    pub species: Vec<ReactiveSpecies>,
    pub reactions: Vec<Reaction>,
    /// Reference temperature `θ₀`.
    pub theta_ref: f64,
}

#[derive(Clone)]
pub enum AuditFamily {
    Radiation(RadiationParams),
    ReactiveFlow(ReactiveFlowParams),
}

/// Concavity, symmetrizability and source factorization at each state.
///
/// A family with a missing closure yields not-applicable reports.
pub fn pointwise_structural_audit(
    family: &AuditFamily,
    states: &[Vec<f64>],
    cfg: &CheckConfig,
) -> Result<Vec<StructuralReport>, CdfError> {
    let sys: Box<dyn CdfSystem> = match family {
        AuditFamily::Radiation(p) => match &p.planck_inverse {
            Some(b) => Box::new(Radiation::new(p, b.clone())?),
            None => return Ok(not_applicable(cfg, "inverse Planck map not supplied")),
        },
        AuditFamily::ReactiveFlow(p) => {
            if p.species.iter().any(|s| s.heat_capacity.is_none()) {
                return Ok(not_applicable(cfg, "heat capacity profile not supplied"));
            }
            Box::new(Reactive::new(p)?)
        }
    };
    Ok(vec![
        checks::check_concavity(sys.as_ref(), states, cfg)?,
        checks::check_symmetrizability(sys.as_ref(), states, cfg)?,
        checks::check_source_factorization(sys.as_ref(), states, cfg)?,
    ])
}

fn not_applicable(cfg: &CheckConfig, why: &str) -> Vec<StructuralReport> {
    [CheckKind::Concavity, CheckKind::Symmetrizability, CheckKind::SourceFactorization]
        .into_iter()
        .map(|k| {
            let mut r = StructuralReport::new(k, Verdict::NotApplicable, cfg.tol);
            r.detail = why.to_string();
            r
        })
        .collect()
}

const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

/// Composite five-point Gauss–Legendre rule on 16 panels.
fn quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut acc = 0.0;
    for p in 0..PANELS {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

/// Rank-one dissipation matrix for `q` against the concave-oriented force.
fn rank_one(q: &[f64], eta_z: &[f64]) -> Mat {
    let m = q.len();
    let dot: f64 = q.iter().zip(eta_z).map(|(a, b)| a * b).sum();
    let qn = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let en = eta_z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if qn == 0.0 || dot.abs() <= 1e-14 * qn * en {
        // zero source, or no factorization through this force
        return Mat::zeros(m, m);
    }
    Mat::from_fn(m, m, |i, j| q[i] * q[j] / dot)
}

fn symmetric_jacobian(grad: &dyn Fn(&[f64], &mut [f64]), u: &[f64]) -> Mat {
    let j = numdiff::jacobian(grad, u, u.len());
    (&j + j.transpose()) * 0.5
}

struct Radiation {
    p: RadiationParams,
    b: Closure,
    ue: Vec<f64>,
}

impl Radiation {
    fn new(p: &RadiationParams, b: Closure) -> Result<Self, CdfError> {
        if !(p.cv > 0.0 && p.gas_constant > 0.0 && p.coupling > 0.0) || p.directions.is_empty() {
            return Err(CdfError::Configuration("radiation needs c_v, R, C > 0 and at least one ray".into()));
        }
        let mut ue = vec![1.0, 0.0, 0.0, 0.0, p.cv * b(p.planck_floor)];
        ue.extend(p.directions.iter().map(|_| p.planck_floor));
        Ok(Self { p: p.clone(), b, ue })
    }

    /// `(ρ, v, e, θ)`.
    fn thermo(&self, u: &[f64]) -> (f64, [f64; 3], f64, f64) {
        let rho = u[0];
        let v = [u[1] / rho, u[2] / rho, u[3] / rho];
        let ke = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        let e = u[4] / rho - ke;
        (rho, v, e, e / self.p.cv)
    }

    /// `B(θ)` by bisection on `b(y) = θ` above the floor.
    fn planck(&self, theta: f64) -> f64 {
        let b = &self.b;
        let lo0 = self.p.planck_floor;
        if theta <= b(lo0) {
            return lo0;
        }
        let (mut lo, mut gap) = (lo0, 1.0f64.max(lo0.abs()));
        let mut hi = lo0 + gap;
        let mut k = 0;
        while b(hi) < theta {
            lo = hi;
            gap *= 2.0;
            hi = lo0 + gap;
            k += 1;
            if k > 200 {
                return f64::NAN;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if b(mid) < theta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn eta_gradient(&self, u: &[f64], out: &mut [f64]) {
        let (rho, v, e, theta) = self.thermo(u);
        let (cv, r) = (self.p.cv, self.p.gas_constant);
        let s0 = cv * libm::log(e) - r * libm::log(rho);
        let ke = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        out[0] = s0 - r + (ke - e) / theta;
        for k in 0..3 {
            out[1 + k] = -v[k] / theta;
        }
        out[4] = 1.0 / theta;
        for (l, o) in out[5..].iter_mut().enumerate() {
            *o = self.p.coupling / (self.b)(u[5 + l]);
        }
    }
}

impl BalanceLaw for Radiation {
    fn layout(&self) -> Layout {
        Layout::new(4, 1 + self.p.directions.len())
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (rho, v, _, theta) = self.thermo(u);
        let p = rho * self.p.gas_constant * theta;
        out[0] = u[1];
        out[1] = u[1] * v[0] + p;
        out[2] = u[2] * v[0];
        out[3] = u[3] * v[0];
        out[4] = (u[4] + p) * v[0];
        for (l, mu) in self.p.directions.iter().enumerate() {
            out[5 + l] = mu * u[5 + l];
        }
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        let (rho, _, _, theta) = self.thermo(u);
        let bt = self.planck(theta);
        out[..4].fill(0.0);
        let mut sum = 0.0;
        for l in 0..self.p.directions.len() {
            let d = u[5 + l] - bt;
            sum += d;
            out[5 + l] = -rho * d;
        }
        out[4] = self.p.coupling * rho * sum;
    }

    fn equilibrium(&self) -> &[f64] {
        &self.ue
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        let (rho, _, e, _) = self.thermo(u);
        if !(rho > 0.0 && e > 0.0) {
            return Err(CdfError::Domain { state: u.to_vec(), reason: "density and internal energy must be positive".into() });
        }
        if u[5..].iter().any(|i| !((self.b)(*i) > 0.0)) {
            return Err(CdfError::Domain { state: u.to_vec(), reason: "inverse Planck map is not positive".into() });
        }
        Ok(())
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for Radiation {
    fn entropy(&self, u: &[f64]) -> f64 {
        let (rho, _, e, _) = self.thermo(u);
        let s0 = self.p.cv * libm::log(e) - self.p.gas_constant * libm::log(rho);
        let inv = |y: f64| 1.0 / (self.b)(y);
        let rad: f64 = u[5..].iter().map(|&i| quad(&inv, self.p.planck_floor, i)).sum();
        -rho * s0 - self.p.coupling * rad
    }

    fn orientation(&self) -> Orientation {
        Orientation::Convex
    }

    fn dissipation(&self, u: &[f64]) -> Mat {
        let mut q = vec![0.0; u.len()];
        self.source(u, &mut q);
        let mut g = vec![0.0; u.len()];
        self.eta_gradient(u, &mut g);
        rank_one(&q[4..], &g[4..])
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let mut g = vec![0.0; u.len()];
        self.eta_gradient(u, &mut g);
        Some(-Vector::from_vec(g))
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let f = |x: &[f64], out: &mut [f64]| self.eta_gradient(x, out);
        Some(-symmetric_jacobian(&f, u))
    }
}

struct Reactive {
    p: ReactiveFlowParams,
    net: ReactionNetwork,
    ue: Vec<f64>,
}

impl Reactive {
    fn new(p: &ReactiveFlowParams) -> Result<Self, CdfError> {
        let n = p.species.len();
        if n == 0 || !(p.theta_ref > 0.0) {
            return Err(CdfError::Configuration("reactive flow needs species and θ₀ > 0".into()));
        }
        if p.species.iter().any(|s| !(s.molar_mass > 0.0 && s.gas_constant > 0.0)) {
            return Err(CdfError::Configuration("molar masses and gas constants must be positive".into()));
        }
        let names = (0..n).map(|i| format!("X{i}")).collect();
        let net = ReactionNetwork::new(names, p.reactions.clone())
            .map_err(|e| CdfError::Configuration(format!("reaction network: {e}")))?;
        let mut ue = vec![0.0; 4 + n];
        for (i, s) in p.species.iter().enumerate() {
            ue[4 + i] = s.molar_mass;
            ue[3] += s.molar_mass * s.energy_ref;
        }
        Ok(Self { p: p.clone(), net, ue })
    }

    fn cv(&self, i: usize) -> &Closure {
        self.p.species[i].heat_capacity.as_ref().expect("checked at construction")
    }

    /// `e_i(θ) = ε_i⁰ + ∫_{θ₀}^θ c_vi`.
    fn species_energy(&self, i: usize, theta: f64) -> f64 {
        let c = self.cv(i);
        self.p.species[i].energy_ref + quad(&|y| c(y), self.p.theta_ref, theta)
    }

    fn species_entropy(&self, i: usize, rho_i: f64, theta: f64) -> f64 {
        let s = &self.p.species[i];
        let c = self.cv(i);
        s.entropy_ref + quad(&|y| c(y) / y, self.p.theta_ref, theta) - s.gas_constant * libm::log(rho_i / s.molar_mass)
    }

    /// `(ρ, v, θ)` with `θ` solving the caloric equation by bisection.
    fn thermo(&self, u: &[f64]) -> (f64, [f64; 3], f64) {
        let rho: f64 = u[4..].iter().sum();
        let v = [u[0] / rho, u[1] / rho, u[2] / rho];
        let e_int = u[3] - 0.5 * rho * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        let f = |theta: f64| -> f64 {
            (0..self.p.species.len()).map(|i| u[4 + i] * self.species_energy(i, theta)).sum::<f64>() - e_int
        };
        let t0 = self.p.theta_ref;
        let (mut lo, mut hi) = (t0, t0);
        let mut k = 0;
        while !(f(lo) <= 0.0 && f(hi) >= 0.0) {
            lo *= 0.5;
            hi *= 2.0;
            k += 1;
            if k > 60 {
                return (rho, v, f64::NAN);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        (rho, v, 0.5 * (lo + hi))
    }

    fn eta_gradient(&self, u: &[f64], out: &mut [f64]) {
        let (_, v, theta) = self.thermo(u);
        let ke = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        for k in 0..3 {
            out[k] = -v[k] / theta;
        }
        out[3] = 1.0 / theta;
        for (i, s) in self.p.species.iter().enumerate() {
            out[4 + i] = self.species_entropy(i, u[4 + i], theta) - s.gas_constant + (ke - self.species_energy(i, theta)) / theta;
        }
    }
}

impl BalanceLaw for Reactive {
    fn layout(&self) -> Layout {
        Layout::new(4, self.p.species.len())
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        let (_, v, theta) = self.thermo(u);
        let p: f64 = theta * self.p.species.iter().enumerate().map(|(i, s)| s.gas_constant * u[4 + i]).sum::<f64>();
        out[0] = u[0] * v[0] + p;
        out[1] = u[1] * v[0];
        out[2] = u[2] * v[0];
        out[3] = (u[3] + p) * v[0];
        for i in 0..self.p.species.len() {
            out[4 + i] = u[4 + i] * v[0];
        }
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[..4].fill(0.0);
        let c: Vec<f64> = self.p.species.iter().enumerate().map(|(i, s)| u[4 + i] / s.molar_mass).collect();
        let mut dc = vec![0.0; c.len()];
        self.net.rhs_into(&c, &mut dc);
        for (i, s) in self.p.species.iter().enumerate() {
            out[4 + i] = s.molar_mass * dc[i];
        }
    }

    fn equilibrium(&self) -> &[f64] {
        &self.ue
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        if u[4..].iter().any(|r| !(*r > 0.0)) {
            return Err(CdfError::Domain { state: u.to_vec(), reason: "partial densities must be positive".into() });
        }
        if !self.thermo(u).2.is_finite() {
            return Err(CdfError::Domain { state: u.to_vec(), reason: "no temperature matches the internal energy".into() });
        }
        Ok(())
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for Reactive {
    fn entropy(&self, u: &[f64]) -> f64 {
        let (_, _, theta) = self.thermo(u);
        -(0..self.p.species.len()).map(|i| u[4 + i] * self.species_entropy(i, u[4 + i], theta)).sum::<f64>()
    }

    fn orientation(&self) -> Orientation {
        Orientation::Convex
    }

    fn dissipation(&self, u: &[f64]) -> Mat {
        let mut q = vec![0.0; u.len()];
        self.source(u, &mut q);
        let mut g = vec![0.0; u.len()];
        self.eta_gradient(u, &mut g);
        rank_one(&q[4..], &g[4..])
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let mut g = vec![0.0; u.len()];
        self.eta_gradient(u, &mut g);
        Some(-Vector::from_vec(g))
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let f = |x: &[f64], out: &mut [f64]| self.eta_gradient(x, out);
        Some(-symmetric_jacobian(&f, u))
    }
}
