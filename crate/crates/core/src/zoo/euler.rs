//! Isentropic gas dynamics with linear damping, and a viscoelastic variant
//! with one relaxing stress.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;
use crate::linalg::{Mat, Vector};
use crate::system::{BalanceLaw, CdfSystem, Layout, LinearBalanceLaw, Orientation};

/// `p(ρ) = κ·ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PressureLaw {
    pub kappa: f64,
    pub gamma: f64,
}

impl Default for PressureLaw {
    fn default() -> Self {
        Self { kappa: 1.0, gamma: 2.0 }
    }
}

impl PressureLaw {
    pub fn pressure(&self, rho: f64) -> f64 {
        self.kappa * libm::pow(rho, self.gamma)
    }

    pub fn sound_speed_sq(&self, rho: f64) -> f64 {
        self.kappa * self.gamma * libm::pow(rho, self.gamma - 1.0)
    }

    /// Potential `P` with `P'' = p'/ρ`.
    fn potential(&self, rho: f64) -> f64 {
        if self.gamma == 1.0 {
            self.kappa * (rho * libm::log(rho) - rho)
        } else {
            self.kappa * libm::pow(rho, self.gamma) / (self.gamma - 1.0)
        }
    }

    fn potential_prime(&self, rho: f64) -> f64 {
        if self.gamma == 1.0 {
            self.kappa * libm::log(rho)
        } else {
            self.kappa * self.gamma * libm::pow(rho, self.gamma - 1.0) / (self.gamma - 1.0)
        }
    }
}

/// `U = (ρ, m)`, `F = (m, m²/ρ + p(ρ))`, `Q = (0, −m)`, with the convex
/// entropy `m²/(2ρ) + P(ρ)` and `M = ρ`.
#[derive(Debug, Clone)]
pub struct EulerDamping {
    pub law: PressureLaw,
    ue: Vec<f64>,
}

/// Damped gas at rest with density `rho_e` as equilibrium.
pub fn euler_damping_system(law: PressureLaw, rho_e: f64) -> Result<EulerDamping, CdfError> {
    if !(law.kappa > 0.0 && law.gamma >= 1.0) {
        return Err(CdfError::Configuration("pressure law needs κ > 0 and γ ≥ 1".into()));
    }
    if !(rho_e > 0.0) {
        return Err(CdfError::Configuration("equilibrium density must be positive".into()));
    }
    Ok(EulerDamping { law, ue: vec![rho_e, 0.0] })
}

impl BalanceLaw for EulerDamping {
    fn layout(&self) -> Layout {
        Layout::new(1, 1)
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = u[1] * u[1] / u[0] + self.law.pressure(u[0]);
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = -u[1];
    }

    fn equilibrium(&self) -> &[f64] {
        &self.ue
    }

    fn flux_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let v = u[1] / u[0];
        Some(Mat::from_row_slice(2, 2, &[0.0, 1.0, self.law.sound_speed_sq(u[0]) - v * v, 2.0 * v]))
    }

    fn source_jacobian(&self, _u: &[f64]) -> Option<Mat> {
        Some(Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]))
    }

    fn linear_source(&self) -> Option<Mat> {
        self.source_jacobian(&self.ue)
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        Some((u[1] / u[0]).abs() + libm::sqrt(self.law.sound_speed_sq(u[0])))
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        if u[0] > 0.0 {
            Ok(())
        } else {
            Err(CdfError::Domain { state: u.to_vec(), reason: "vacuum state ρ ≤ 0".into() })
        }
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for EulerDamping {
    fn entropy(&self, u: &[f64]) -> f64 {
        0.5 * u[1] * u[1] / u[0] + self.law.potential(u[0])
    }

    fn orientation(&self) -> Orientation {
        Orientation::Convex
    }

    fn dissipation(&self, u: &[f64]) -> Mat {
        Mat::from_element(1, 1, u[0])
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let v = u[1] / u[0];
        Some(Vector::from_vec(vec![-0.5 * v * v + self.law.potential_prime(u[0]), v]))
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let (rho, v) = (u[0], u[1] / u[0]);
        let c2 = self.law.sound_speed_sq(rho);
        Some(Mat::from_row_slice(2, 2, &[(v * v + c2) / rho, -v / rho, -v / rho, 1.0 / rho]))
    }

    fn entropy_flux(&self, u: &[f64]) -> Option<f64> {
        Some((self.entropy(u) + self.law.pressure(u[0])) * u[1] / u[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MaxwellStressParams {
    /// Elastic modulus `E`.
    pub modulus: f64,
    /// Stress relaxation time `ξ`.
    pub xi: f64,
    pub epsilon: f64,
}

impl Default for MaxwellStressParams {
    fn default() -> Self {
        Self { modulus: 1.0, xi: 1.0, epsilon: 1.0 }
    }
}

/// Linear viscoelastic bar, `U = (e, v, τ)`:
///
/// ```text
/// e_t − v_x           = 0
/// v_t − (E·e + τ)_x   = 0
/// τ_t − v_x/ε         = −τ/(ξ·ε)
/// ```
///
/// symmetrized by `A₀ = diag(E, 1, ε)`, so `M = 1/(ξ·ε²)`.
pub fn maxwell_stress_system(p: &MaxwellStressParams) -> Result<LinearBalanceLaw, CdfError> {
    if !(p.modulus > 0.0 && p.xi > 0.0 && p.epsilon > 0.0) {
        return Err(CdfError::Configuration("modulus, ξ and ε must be positive".into()));
    }
    let a = Mat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, -p.modulus, 0.0, -1.0, 0.0, -1.0 / p.epsilon, 0.0]);
    let mut b = Mat::zeros(3, 3);
    b[(2, 2)] = -1.0 / (p.xi * p.epsilon);
    LinearBalanceLaw::new(2, a, b)?.with_symmetrizer(Mat::from_diagonal(&Vector::from_vec(vec![p.modulus, 1.0, p.epsilon])))
}
