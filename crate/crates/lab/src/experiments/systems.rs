//! Named systems and deliberately broken variants of them.

use cdf_core::linalg::{self, Mat, Vector};
use cdf_core::system::{self, DerivativeMode, LinearBalanceLaw};
use cdf_core::zoo::{
    cattaneo_system, euler_damping_system, maxwell_optics_system, maxwell_stress_system, thermomass_system,
    CattaneoParams, MaxwellStressParams, PressureLaw, ThermomassParams,
};
use cdf_core::{BalanceLaw, CdfError, CdfSystem, Layout, Orientation};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{section, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemId {
    Cattaneo,
    Thermomass,
    MaxwellOptics,
    EulerDamping,
    MaxwellStress,
    Telegraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsParams {
    pub e_background: f64,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self { e_background: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerParams {
    pub kappa: f64,
    pub gamma: f64,
    pub rho_e: f64,
}

impl Default for EulerParams {
    fn default() -> Self {
        let law = PressureLaw::default();
        Self { kappa: law.kappa, gamma: law.gamma, rho_e: 1.0 }
    }
}

/// `y_t + c·z_x = 0`, `z_t + c·y_x = −r·z` with entropy `|U|²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelegraphParams {
    pub speed: f64,
    pub rate: f64,
}

impl Default for TelegraphParams {
    fn default() -> Self {
        Self { speed: 1.0, rate: 1.0 }
    }
}

pub fn telegraph(p: &TelegraphParams) -> Result<LinearBalanceLaw, CdfError> {
    if !(p.speed > 0.0 && p.rate > 0.0) {
        return Err(CdfError::Configuration("telegraph speed and rate must be positive".into()));
    }
    LinearBalanceLaw::new(
        1,
        Mat::from_row_slice(2, 2, &[0.0, p.speed, p.speed, 0.0]),
        Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -p.rate]),
    )?
    .with_symmetrizer(Mat::identity(2, 2))
}

/// Builds a named system from its `params` block at `path`.
pub fn build(id: SystemId, params: &Value, path: &str) -> Result<Box<dyn CdfSystem>, ConfigError> {
    let wrap = |e: CdfError| ConfigError::new(path, e);
    Ok(match id {
        SystemId::Cattaneo => Box::new(cattaneo_system(&section::<CattaneoParams>(params, path)?).map_err(wrap)?),
        SystemId::Thermomass => Box::new(thermomass_system(&section::<ThermomassParams>(params, path)?).map_err(wrap)?),
        SystemId::MaxwellOptics => {
            Box::new(maxwell_optics_system(section::<OpticsParams>(params, path)?.e_background).map_err(wrap)?)
        }
        SystemId::EulerDamping => {
            let p: EulerParams = section(params, path)?;
            Box::new(euler_damping_system(PressureLaw { kappa: p.kappa, gamma: p.gamma }, p.rho_e).map_err(wrap)?)
        }
        SystemId::MaxwellStress => {
            Box::new(maxwell_stress_system(&section::<MaxwellStressParams>(params, path)?).map_err(wrap)?)
        }
        SystemId::Telegraph => Box::new(telegraph(&section::<TelegraphParams>(params, path)?).map_err(wrap)?),
    })
}

fn product(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect()
}

/// Admissible sample states around the equilibrium of a named system.
pub fn default_samples(id: SystemId, ue: &[f64]) -> Vec<Vec<f64>> {
    match id {
        SystemId::Cattaneo => product(&[0.5 * ue[0], ue[0], 2.0 * ue[0]], &[-0.1, 0.0, 0.1]),
        SystemId::Thermomass => product(&[0.8 * ue[0], ue[0], 1.2 * ue[0]], &[-0.05, 0.0, 0.05]),
        SystemId::MaxwellOptics => {
            let mut out = Vec::new();
            for chi in [0.5, 1.0, 2.0] {
                for d in [-1.0, 0.0, 1.0] {
                    for b in [-1.0, 0.0, 1.0] {
                        out.push(vec![d, b, chi]);
                    }
                }
            }
            out
        }
        SystemId::EulerDamping => {
            let mut out = Vec::new();
            for rho in [0.5 * ue[0], ue[0], 2.0 * ue[0]] {
                for v in [0.0, 0.5] {
                    out.push(vec![rho, rho * v]);
                }
            }
            out
        }
        SystemId::MaxwellStress => vec![vec![0.1, -0.2, 0.3], vec![0.0; 3], vec![-1.0, 1.0, 0.5]],
        SystemId::Telegraph => product(&[-1.0, 0.0, 0.5], &[-0.5, 0.0, 1.0]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    None,
    /// `Q → −Q` and `M → −M`: the relaxation becomes anti-dissipative.
    SignFlippedSource,
    /// Adds `σ·(u₀ − u₀,e)²` to the concave-oriented entropy with `σ`
    /// exceeding the largest Hessian eigenvalue modulus at `U_e`.
    IndefiniteEntropy,
    /// Keeps only `F_y(y, z_e)` and `F_z(y_e, z)`: the blocks no longer
    /// exchange information through the flux.
    DecoupledFlux,
}

/// A system with one structural ingredient broken.
pub struct Altered {
    inner: Box<dyn CdfSystem>,
    variant: Variant,
    sigma: f64,
    sign: f64,
}

impl Altered {
    pub fn new(inner: Box<dyn CdfSystem>, variant: Variant) -> Self {
        let ue = inner.equilibrium().to_vec();
        let hess = system::entropy_hessian(&*inner, &ue, DerivativeMode::PreferAnalytic).value;
        let spread = linalg::symmetric_eigenvalues(&hess).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sign = inner.orientation().concave_sign();
        Self { inner, variant, sigma: 1.0 + spread, sign }
    }

    fn split_flux(&self, u: &[f64], out: &mut [f64]) {
        let n = self.inner.layout().conserved;
        let ue = self.inner.equilibrium();
        let mut v = u.to_vec();
        v[n..].copy_from_slice(&ue[n..]);
        self.inner.flux(&v, out);
        let mut w = u.to_vec();
        w[..n].copy_from_slice(&ue[..n]);
        let mut tail = vec![0.0; u.len()];
        self.inner.flux(&w, &mut tail);
        out[n..].copy_from_slice(&tail[n..]);
    }
}

impl BalanceLaw for Altered {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }

    fn flux(&self, u: &[f64], out: &mut [f64]) {
        match self.variant {
            Variant::DecoupledFlux => self.split_flux(u, out),
            _ => self.inner.flux(u, out),
        }
    }

    fn source(&self, u: &[f64], out: &mut [f64]) {
        self.inner.source(u, out);
        if self.variant == Variant::SignFlippedSource {
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    fn equilibrium(&self) -> &[f64] {
        self.inner.equilibrium()
    }

    fn flux_jacobian(&self, u: &[f64]) -> Option<Mat> {
        match self.variant {
            Variant::DecoupledFlux => None,
            _ => self.inner.flux_jacobian(u),
        }
    }

    fn source_jacobian(&self, u: &[f64]) -> Option<Mat> {
        let j = self.inner.source_jacobian(u)?;
        Some(if self.variant == Variant::SignFlippedSource { -j } else { j })
    }

    fn linear_source(&self) -> Option<Mat> {
        let b = self.inner.linear_source()?;
        Some(if self.variant == Variant::SignFlippedSource { -b } else { b })
    }

    fn max_wave_speed(&self, u: &[f64]) -> Option<f64> {
        match self.variant {
            Variant::DecoupledFlux => None,
            _ => self.inner.max_wave_speed(u),
        }
    }

    fn check_state(&self, u: &[f64]) -> Result<(), CdfError> {
        self.inner.check_state(u)
    }

    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for Altered {
    fn entropy(&self, u: &[f64]) -> f64 {
        let s = self.inner.entropy(u);
        if self.variant == Variant::IndefiniteEntropy {
            let d = u[0] - self.inner.equilibrium()[0];
            s + self.sign * self.sigma * d * d
        } else {
            s
        }
    }

    fn orientation(&self) -> Orientation {
        self.inner.orientation()
    }

    fn dissipation(&self, u: &[f64]) -> Mat {
        let m = self.inner.dissipation(u);
        if self.variant == Variant::SignFlippedSource {
            -m
        } else {
            m
        }
    }

    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let mut g = self.inner.entropy_gradient(u)?;
        if self.variant == Variant::IndefiniteEntropy {
            g[0] += 2.0 * self.sign * self.sigma * (u[0] - self.inner.equilibrium()[0]);
        }
        Some(g)
    }

    fn entropy_hessian(&self, u: &[f64]) -> Option<Mat> {
        let mut h = self.inner.entropy_hessian(u)?;
        if self.variant == Variant::IndefiniteEntropy {
            h[(0, 0)] += 2.0 * self.sign * self.sigma;
        }
        Some(h)
    }

    fn entropy_flux(&self, u: &[f64]) -> Option<f64> {
        match self.variant {
            Variant::None | Variant::SignFlippedSource => self.inner.entropy_flux(u),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cattaneo() -> Box<dyn CdfSystem> {
        build(SystemId::Cattaneo, &Value::Null, "model.params").unwrap()
    }

    #[test]
    fn unaltered_wrapper_is_transparent() {
        let a = Altered::new(cattaneo(), Variant::None);
        let inner = cattaneo();
        let u = [1.3, 0.05];
        let (mut f1, mut f2) = ([0.0; 2], [0.0; 2]);
        a.flux(&u, &mut f1);
        inner.flux(&u, &mut f2);
        assert_eq!(f1, f2);
        assert_eq!(a.entropy(&u), inner.entropy(&u));
    }

    #[test]
    fn decoupled_flux_freezes_cross_dependence() {
        let a = Altered::new(cattaneo(), Variant::DecoupledFlux);
        let ue = a.equilibrium().to_vec();
        let (mut f0, mut f1) = ([0.0; 2], [0.0; 2]);
        a.flux(&ue, &mut f0);
        a.flux(&[ue[0], ue[1] + 0.3], &mut f1);
        assert_eq!(f0[0], f1[0]);
    }

    #[test]
    fn indefinite_entropy_gradient_matches_difference_quotient() {
        let a = Altered::new(cattaneo(), Variant::IndefiniteEntropy);
        let u = [1.4, 0.02];
        let h = 1e-6;
        let fd = (a.entropy(&[u[0] + h, u[1]]) - a.entropy(&[u[0] - h, u[1]])) / (2.0 * h);
        if let Some(g) = a.entropy_gradient(&u) {
            assert!((g[0] - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn unknown_parameter_is_a_schema_error() {
        let v: Value = serde_json::from_str(r#"{"tau": 1.0}"#).unwrap();
        let e = build(SystemId::Cattaneo, &v, "model.params").err().unwrap();
        assert!(e.path.starts_with("model.params"), "{e}");
    }
}
