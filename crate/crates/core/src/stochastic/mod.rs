//! Master equations, discretized Fokker–Planck equations and mass-action
//! kinetics in flux–force form.

pub mod fokker_planck;
pub mod markov;
pub mod mass_action;
pub mod ode;
pub mod pea;

pub use fokker_planck::{fokker_planck_generator, FokkerPlanck};
pub use markov::{
    communicating_classes, detailed_balance, onsager_matrix, positive_stability_check, simulate_master, steady_state, DetailedBalance,
    MarkovGenerator, MasterTrajectory, OnsagerDecomposition, PositiveStability, StepMode,
};
pub use mass_action::{mass_action_rhs, simulate_mass_action, MassActionTrajectory, Reaction, ReactionNetwork};
pub use ode::OdeOptions;
pub use pea::{pea_experiment, PeaReduction, PeaReport, PeaRow};
