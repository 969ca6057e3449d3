//! Conservation-dissipation balance laws in one space dimension.
//!
//! The crate is `no_std` with `alloc`. It provides the system abstraction,
//! structural checks, a split finite-volume solver, Markov and mass-action
//! models, a catalogue of concrete systems, boundary feedback control and a
//! manufactured-solution order study.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod checks;
pub mod control;
pub mod error;
pub mod field;
pub mod linalg;
pub mod numdiff;
pub mod solver;
pub mod stochastic;
pub mod system;
pub mod verification;
pub mod zoo;

pub use error::{CdfError, StochasticError};
pub use field::{Boundary, Grid1D, StateField};
pub use system::{BalanceLaw, CdfSystem, Layout, Orientation};
