//! Concrete balance laws and the experiments run on them.

pub mod audit;
pub mod axonal;
pub mod cattaneo;
pub mod dispersion;
pub mod euler;
pub mod optics;

pub use audit::{pointwise_structural_audit, AuditFamily, RadiationParams, ReactiveFlowParams, ReactiveSpecies};
pub use axonal::{axonal_relaxation, axonal_steady_state, axonal_system, AxonalParams, AxonalRun, AxonalRunConfig};
pub use cattaneo::{
    cattaneo_front_speed, cattaneo_system, fourier_limit_study, thermomass_system, CattaneoParams, CattaneoSystem,
    FourierLimitConfig, FourierLimitReport, FourierMethod, FrontSpeedConfig, FrontSpeedReport, ThermomassParams,
};
pub use dispersion::{
    classify, dispersion_spectrum, time_domain_growth, Classification, DispersionRow, GrowthConfig, GrowthRun,
    LinearSystemSpec,
};
pub use euler::{euler_damping_system, maxwell_stress_system, EulerDamping, MaxwellStressParams, PressureLaw};
pub use optics::{maxwell_optics_system, MaxwellOptics};
