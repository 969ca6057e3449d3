//! Quasi-linear Maxwell system for nonlinear optics, reduced to one space
//! dimension with transverse fields.
//!
//! `U = (D, B, χ)`, `E = D/(1+χ)`:
//!
//! ```text
//! D_t + B_x = 0
//! B_t + E_x = 0
//! χ_t       = E² − χ
//! ```
//!
//! with the convex entropy `s = D²/(1+χ) + B² + χ²/2` and `M = 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;
use crate::linalg::{Mat, Vector};
use crate::system::{BalanceLaw, CdfSystem, Layout, Orientation};

#[derive(Debug, Clone)]
pub struct MaxwellOptics {
    ue: Vec<f64>,
}

/// Equilibrium with background field `E_e`: `χ_e = E_e²`, `D_e = (1+χ_e)·E_e`,
/// `B_e = 0`.
///
/// With `E_e = 0` the eigenvectors `(1, ±c, 0)` of the flux Jacobian lie in
/// the source kernel and condition (c) fails.
pub fn maxwell_optics_system(e_background: f64) -> Result<MaxwellOptics, CdfError> {
    if !e_background.is_finite() {
        return Err(CdfError::Configuration("background field must be finite".into()));
    }
    let chi = e_background * e_background;
    Ok(MaxwellOptics { ue: vec![(1.0 + chi) * e_background, 0.0, chi] })
}

impl MaxwellOptics {
    /// `E = D/(1+χ)`.
    pub fn electric_field(u: &[f64]) -> f64 {
        u[0] / (1.0 + u[2])
    }
}

impl Default for MaxwellOptics {
    fn default() -> Self {
        maxwell_optics_system(1.0).expect("finite background")
    }
}

impl BalanceLaw for MaxwellOptics {
    fn layout(&self) -> Layout {
        Layout::new(2, 1)
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        out[0] = u[1];
        out[1] = Self::electric_field(u);
        out[2] = 0.0;
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        let e = Self::electric_field(u);
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = e * e - u[2];
    }

    fn equilibrium(&self) -> &[f64] {
        &self.ue
    }

    fn flux_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let a = 1.0 / (1.0 + u[2]);
        Some(Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, a, 0.0, -u[0] * a * a, 0.0, 0.0, 0.0]))
    }

    fn source_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let a = 1.0 / (1.0 + u[2]);
        let e = u[0] * a;
        Some(Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * e * a, 0.0, -2.0 * e * e * a - 1.0]))
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        Some(libm::sqrt(1.0 / (1.0 + u[2])))
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        if u[2] > -1.0 {
            Ok(())
        } else {
            Err(CdfError::Domain { state: u.to_vec(), reason: "χ ≤ −1 makes the permittivity singular".into() })
        }
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for MaxwellOptics {
    fn entropy(&self, u: &[f64]) -> f64 {
        u[0] * u[0] / (1.0 + u[2]) + u[1] * u[1] + 0.5 * u[2] * u[2]
    }

    fn orientation(&self) -> Orientation {
        Orientation::Convex
    }

    fn dissipation(&self, _u: &[f64]) -> Mat {
        Mat::identity(1, 1)
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let e = Self::electric_field(u);
        Some(Vector::from_vec(vec![2.0 * e, 2.0 * u[1], -e * e + u[2]]))
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let a = 1.0 / (1.0 + u[2]);
        let e = u[0] * a;
        Some(Mat::from_row_slice(
            3,
            3,
            &[2.0 * a, 0.0, -2.0 * e * a, 0.0, 2.0, 0.0, -2.0 * e * a, 0.0, 2.0 * e * e * a + 1.0],
        ))
    }

    fn entropy_flux(&self, u: &[f64]) -> Option<f64> {
        Some(2.0 * Self::electric_field(u) * u[1])
    }
}
