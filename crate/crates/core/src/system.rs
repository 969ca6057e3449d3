//! Balance-law abstractions.
//!
//! A [`BalanceLaw`] is `∂_t U + ∂_x F(U) = Q(U)` in one space dimension with
//! the state split as `U = (y, z)`: `n` conserved rows whose source is zero and
//! `m` dissipative rows. A [`CdfSystem`] adds the entropy `s(U)` and the
//! dissipation matrix `M(U)` that close the conservation-dissipation form.
//!
//! Sign convention: the dissipative source factorizes as `q = M·η_z` where
//! `η` is the *concave-oriented* entropy (`η = s` for a concave declaration,
//! `η = −s` for a convex one). The production rate `η_z·M·η_z` is then
//! nonnegative whenever the symmetric part of `M` is.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;
use crate::linalg::{self, Mat, Vector};
use crate::numdiff;

/// Block sizes of the state vector `U = (y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layout {
    pub conserved: usize,
    pub dissipative: usize,
}

impl Layout {
    pub const fn new(conserved: usize, dissipative: usize) -> Self {
        Self { conserved, dissipative }
    }

    pub const fn dim(&self) -> usize {
        self.conserved + self.dissipative
    }
}

/// Which way the declared entropy curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Orientation {
    /// Physical entropy; increases along trajectories.
    Concave,
    /// Mathematical entropy; decreases along trajectories.
    Convex,
}

impl Orientation {
    /// Factor turning the declared entropy into the concave-oriented one.
    pub fn concave_sign(self) -> f64 {
        match self {
            Orientation::Concave => 1.0,
            Orientation::Convex => -1.0,
        }
    }
}

/// `∂_t U + ∂_x F(U) = Q(U)` with `Q = (0, q)`.
pub trait BalanceLaw: Send + Sync {
    fn layout(&self) -> Layout;

    fn flux(&self, u: &[f64], out: &mut [f64]);

    /// Full-length source vector; the first `n` entries must be zero.
    fn source(&self, u: &[f64], out: &mut [f64]);

    /// Equilibrium state `U_e` with `Q(U_e) = 0`.
    fn equilibrium(&self) -> &[f64];

    fn flux_jacobian(&self, _u: &[f64]) -> Option<Mat> {
        None
    }

    fn source_jacobian(&self, _u: &[f64]) -> Option<Mat> {
        None
    }

    /// `B` when `Q(U) = B·U` for a constant matrix.
    fn linear_source(&self) -> Option<Mat> {
        None
    }

    /// Spectral radius of `F_U(u)` when known in closed form.
    fn max_wave_speed(&self, _u: &[f64]) -> Option<f64> {
        None
    }

    /// Rejects states outside the model's admissible set.
    fn check_state(&self, _u: &[f64]) -> Result<(), CdfError> {
        Ok(())
    }

    /// Entropy structure, when the law carries one.
    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        None
    }
}

/// A balance law closed by an entropy and a dissipation matrix.
pub trait CdfSystem: BalanceLaw {
    fn entropy(&self, u: &[f64]) -> f64;

    fn orientation(&self) -> Orientation;

    /// `m × m` dissipation matrix `M(U)`.
    fn dissipation(&self, u: &[f64]) -> Mat;

    fn entropy_gradient(&self, _u: &[f64]) -> Option<Vector> {
        None
    }

    fn entropy_hessian(&self, _u: &[f64]) -> Option<Mat> {
        None
    }

    /// Entropy flux potential `J^f` with `J^f_U = s_U·F_U`.
    fn entropy_flux(&self, _u: &[f64]) -> Option<f64> {
        None
    }
}

/// Whether checks may use analytic derivatives supplied by the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DerivativeMode {
    #[default]
    PreferAnalytic,
    FiniteDifference,
}

/// A derivative together with how it was obtained.
#[derive(Debug, Clone)]
pub struct Derived<T> {
    pub value: T,
    pub finite_difference: bool,
}

impl<T> Derived<T> {
    fn analytic(value: T) -> Self {
        Self { value, finite_difference: false }
    }
    fn fd(value: T) -> Self {
        Self { value, finite_difference: true }
    }
}

pub fn entropy_gradient(sys: &dyn CdfSystem, u: &[f64], mode: DerivativeMode) -> Derived<Vector> {
    if mode == DerivativeMode::PreferAnalytic {
        if let Some(g) = sys.entropy_gradient(u) {
            return Derived::analytic(g);
        }
    }
    Derived::fd(numdiff::gradient(&|x| sys.entropy(x), u))
}

pub fn entropy_hessian(sys: &dyn CdfSystem, u: &[f64], mode: DerivativeMode) -> Derived<Mat> {
    if mode == DerivativeMode::PreferAnalytic {
        if let Some(h) = sys.entropy_hessian(u) {
            return Derived::analytic(h);
        }
    }
    Derived::fd(numdiff::hessian(&|x| sys.entropy(x), u))
}

pub fn flux_jacobian(sys: &dyn BalanceLaw, u: &[f64], mode: DerivativeMode) -> Derived<Mat> {
    if mode == DerivativeMode::PreferAnalytic {
        if let Some(j) = sys.flux_jacobian(u) {
            return Derived::analytic(j);
        }
    }
    let d = sys.layout().dim();
    Derived::fd(numdiff::jacobian(&|x, out| sys.flux(x, out), u, d))
}

pub fn source_jacobian(sys: &dyn BalanceLaw, u: &[f64], mode: DerivativeMode) -> Derived<Mat> {
    if mode == DerivativeMode::PreferAnalytic {
        if let Some(j) = sys.source_jacobian(u) {
            return Derived::analytic(j);
        }
        if let Some(b) = sys.linear_source() {
            return Derived::analytic(b);
        }
    }
    let d = sys.layout().dim();
    Derived::fd(numdiff::jacobian(&|x, out| sys.source(x, out), u, d))
}

/// Spectral radius of the flux Jacobian at `u`.
pub fn wave_speed(sys: &dyn BalanceLaw, u: &[f64]) -> f64 {
    match sys.max_wave_speed(u) {
        Some(s) => s,
        None => linalg::spectral_radius(&flux_jacobian(sys, u, DerivativeMode::PreferAnalytic).value),
    }
}

/// Checks the declaration invariants: zero conserved source rows at every
/// sample and `Q(U_e) = 0` to `1e-12`.
pub fn validate(sys: &dyn BalanceLaw, samples: &[Vec<f64>]) -> Result<(), CdfError> {
    let layout = sys.layout();
    let dim = layout.dim();
    if dim == 0 {
        return Err(CdfError::Configuration("empty state vector".into()));
    }
    let ue = sys.equilibrium();
    if ue.len() != dim {
        return Err(CdfError::Configuration(format!(
            "equilibrium has {} entries, layout needs {dim}",
            ue.len()
        )));
    }
    let mut q = vec![0.0; dim];
    sys.source(ue, &mut q);
    let res = q.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(res <= 1e-12) {
        return Err(CdfError::Evaluation {
            state: ue.to_vec(),
            reason: format!("Q(U_e) has residual {res:e}"),
        });
    }
    for s in samples {
        if s.len() != dim {
            return Err(CdfError::Configuration(format!("sample of length {} for dimension {dim}", s.len())));
        }
        sys.source(s, &mut q);
        if let Some(v) = q[..layout.conserved].iter().find(|v| **v != 0.0) {
            return Err(CdfError::Evaluation {
                state: s.clone(),
                reason: format!("conserved source row is {v:e}, must vanish"),
            });
        }
    }
    Ok(())
}

type VecMap = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type ScalarMap = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MatMap = Box<dyn Fn(&[f64]) -> Mat + Send + Sync>;

/// A system declared directly from closures.
pub struct CustomSystem {
    layout: Layout,
    flux: VecMap,
    source: VecMap,
    entropy: ScalarMap,
    orientation: Orientation,
    dissipation: MatMap,
    equilibrium: Vec<f64>,
}

impl core::fmt::Debug for CustomSystem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CustomSystem")
            .field("layout", &self.layout)
            .field("orientation", &self.orientation)
            .field("equilibrium", &self.equilibrium)
            .finish_non_exhaustive()
    }
}

impl CustomSystem {
    pub fn builder(conserved: usize, dissipative: usize) -> CustomSystemBuilder {
        CustomSystemBuilder {
            layout: Layout::new(conserved, dissipative),
            flux: None,
            source: None,
            entropy: None,
            orientation: Orientation::Concave,
            dissipation: None,
            equilibrium: None,
        }
    }
}

pub struct CustomSystemBuilder {
    layout: Layout,
    flux: Option<VecMap>,
    source: Option<VecMap>,
    entropy: Option<ScalarMap>,
    orientation: Orientation,
    dissipation: Option<MatMap>,
    equilibrium: Option<Vec<f64>>,
}

impl CustomSystemBuilder {
    pub fn flux(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.flux = Some(Box::new(f));
        self
    }

    pub fn source(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.source = Some(Box::new(f));
        self
    }

    pub fn entropy(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, orientation: Orientation) -> Self {
        self.entropy = Some(Box::new(f));
        self.orientation = orientation;
        self
    }

    pub fn dissipation(mut self, f: impl Fn(&[f64]) -> Mat + Send + Sync + 'static) -> Self {
        self.dissipation = Some(Box::new(f));
        self
    }

    pub fn equilibrium(mut self, ue: Vec<f64>) -> Self {
        self.equilibrium = Some(ue);
        self
    }

    /// Missing flux or source default to zero; missing dissipation to the
    /// zero matrix. Declaring a dissipation requires `m ≥ 1`.
    pub fn build(self) -> Result<CustomSystem, CdfError> {
        let dim = self.layout.dim();
        let m = self.layout.dissipative;
        if self.dissipation.is_some() && m == 0 {
            return Err(CdfError::Configuration("dissipation declared with m = 0".into()));
        }
        let sys = CustomSystem {
            layout: self.layout,
            flux: self.flux.unwrap_or_else(|| Box::new(|_, out: &mut [f64]| out.fill(0.0))),
            source: self.source.unwrap_or_else(|| Box::new(|_, out: &mut [f64]| out.fill(0.0))),
            entropy: self
                .entropy
                .ok_or_else(|| CdfError::Configuration("entropy is required".into()))?,
            orientation: self.orientation,
            dissipation: self.dissipation.unwrap_or_else(|| Box::new(move |_| Mat::zeros(m, m))),
            equilibrium: self.equilibrium.unwrap_or_else(|| vec![0.0; dim]),
        };
        validate(&sys, &[])?;
        Ok(sys)
    }
}

impl BalanceLaw for CustomSystem {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        (self.flux)(u, out)
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        (self.source)(u, out)
    }
    fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }
    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        Some(self)
    }
}

impl CdfSystem for CustomSystem {
    fn entropy(&self, u: &[f64]) -> f64 {
        (self.entropy)(u)
    }
    fn orientation(&self) -> Orientation {
        self.orientation
    }
    fn dissipation(&self, u: &[f64]) -> Mat {
        (self.dissipation)(u)
    }
}

/// `∂_t U + A·∂_x U = B·U` with constant matrices.
///
/// With a symmetric positive-definite symmetrizer `A₀` the law also carries
/// the convex entropy `½UᵀA₀U`; its dissipation matrix is `−B_zz·X₂⁻¹`, which
/// factorizes the source only when `B` has no `z ← y` coupling.
#[derive(Debug, Clone)]
pub struct LinearBalanceLaw {
    layout: Layout,
    flux: Mat,
    source: Mat,
    symmetrizer: Option<Mat>,
    speed: f64,
    zero: Vec<f64>,
}

impl LinearBalanceLaw {
    pub fn new(conserved: usize, flux: Mat, source: Mat) -> Result<Self, CdfError> {
        let d = flux.nrows();
        if flux.ncols() != d || source.shape() != (d, d) || conserved > d {
            return Err(CdfError::Configuration("inconsistent linear system dimensions".into()));
        }
        if source.rows(0, conserved).iter().any(|v| *v != 0.0) {
            return Err(CdfError::Configuration("conserved rows of B must vanish".into()));
        }
        let speed = linalg::spectral_radius(&flux);
        Ok(Self {
            layout: Layout::new(conserved, d - conserved),
            flux,
            source,
            symmetrizer: None,
            speed,
            zero: vec![0.0; d],
        })
    }

    pub fn with_symmetrizer(mut self, a0: Mat) -> Result<Self, CdfError> {
        let d = self.layout.dim();
        if a0.shape() != (d, d) {
            return Err(CdfError::Configuration("symmetrizer has wrong shape".into()));
        }
        self.symmetrizer = Some(a0);
        Ok(self)
    }

    pub fn flux_matrix(&self) -> &Mat {
        &self.flux
    }

    pub fn source_matrix(&self) -> &Mat {
        &self.source
    }
}

impl BalanceLaw for LinearBalanceLaw {
    fn layout(&self) -> Layout {
        self.layout
    }
    fn flux(&self, u: &[f64], out: &mut [f64]) {
        mat_vec(&self.flux, u, out);
    }
    fn source(&self, u: &[f64], out: &mut [f64]) {
        mat_vec(&self.source, u, out);
    }
    fn equilibrium(&self) -> &[f64] {
        &self.zero
    }
    fn flux_jacobian(&self, _u: &[f64]) -> Option<Mat> {
        Some(self.flux.clone())
    }
    fn source_jacobian(&self, _u: &[f64]) -> Option<Mat> {
        Some(self.source.clone())
    }
    fn linear_source(&self) -> Option<Mat> {
        Some(self.source.clone())
    }
    fn max_wave_speed(&self, _u: &[f64]) -> Option<f64> {
        Some(self.speed)
    }
    fn as_cdf(&self) -> Option<&dyn CdfSystem> {
        if self.symmetrizer.is_some() && self.layout.dissipative > 0 {
            Some(self)
        } else {
            None
        }
    }
}

impl CdfSystem for LinearBalanceLaw {
    fn entropy(&self, u: &[f64]) -> f64 {
        let a0 = self.symmetrizer.as_ref().expect("entropy needs a symmetrizer");
        let v = Vector::from_column_slice(u);
        0.5 * v.dot(&(a0 * &v))
    }
    fn orientation(&self) -> Orientation {
        Orientation::Convex
    }
    fn dissipation(&self, _u: &[f64]) -> Mat {
        let a0 = self.symmetrizer.as_ref().expect("dissipation needs a symmetrizer");
        let (n, m) = (self.layout.conserved, self.layout.dissipative);
        let x2 = a0.view((n, n), (m, m)).clone_owned();
        let bzz = self.source.view((n, n), (m, m)).clone_owned();
        match x2.try_inverse() {
            Some(inv) => -(bzz * inv),
            None => Mat::from_element(m, m, f64::NAN),
        }
    }
    fn entropy_gradient(&self, u: &[f64]) -> Option<Vector> {
        let a0 = self.symmetrizer.as_ref()?;
        Some(a0 * Vector::from_column_slice(u))
    }
    fn entropy_hessian(&self, _u: &[f64]) -> Option<Mat> {
        self.symmetrizer.clone()
    }
    fn entropy_flux(&self, u: &[f64]) -> Option<f64> {
        let a0 = self.symmetrizer.as_ref()?;
        let v = Vector::from_column_slice(u);
        Some(0.5 * v.dot(&(a0 * &self.flux * &v)))
    }
}

pub(crate) fn mat_vec(m: &Mat, u: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..m.ncols()).map(|j| m[(i, j)] * u[j]).sum();
    }
}
