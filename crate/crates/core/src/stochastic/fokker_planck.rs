//! Finite-volume discretization of a 1-D Fokker–Planck equation with
//! reflecting boundaries as a Markov generator on cell masses.

use alloc::format;
use alloc::vec::Vec;

use crate::error::StochasticError;
use crate::linalg::{Mat, Vector};
use crate::stochastic::markov::MarkovGenerator;

/// Largest admissible cell Péclet number `|u|·Δx/D`.
pub const MAX_CELL_PECLET: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct FokkerPlanck {
    pub generator: MarkovGenerator,
    pub centers: Vec<f64>,
    pub dx: f64,
}

impl FokkerPlanck {
    /// `½Σ P_i²/P_s,i − ½` on cell masses.
    pub fn tsallis(&self, p: &Vector) -> f64 {
        self.generator.tsallis(p)
    }

    /// Boltzmann–Gibbs relative entropy on cell masses.
    pub fn free_energy(&self, p: &Vector) -> f64 {
        self.generator.free_energy(p)
    }
}

/// Discretizes `∂_t ρ = −∂_x(u·ρ − D·∂_x ρ)` on `cells` cells of `[a, b]`.
///
/// The interface flux is `u·(ρ_i + ρ_{i+1})/2 − D·(ρ_{i+1} − ρ_i)/Δx` with
/// `u` and `D` evaluated at the interface, so the jump rates between
/// neighbouring cells are `(±u/2 + D/Δx)/Δx`.
pub fn fokker_planck_generator(
    drift: &dyn Fn(f64) -> f64,
    diffusion: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    cells: usize,
) -> Result<FokkerPlanck, StochasticError> {
    if cells < 2 || !(b > a) {
        return Err(StochasticError::Discretization(format!("need at least 2 cells on a nonempty interval, got {cells} on [{a}, {b}]")));
    }
    let dx = (b - a) / cells as f64;
    let mut q = Mat::zeros(cells, cells);
    for i in 0..cells - 1 {
        let x = a + (i + 1) as f64 * dx;
        let (u, d) = (drift(x), diffusion(x));
        if !(d > 0.0) || !d.is_finite() || !u.is_finite() {
            return Err(StochasticError::Domain(format!("diffusion D({x}) = {d} must be positive and finite")));
        }
        let peclet = u.abs() * dx / d;
        if peclet > MAX_CELL_PECLET {
            return Err(StochasticError::Discretization(format!(
                "cell Péclet number {peclet:.3} at x = {x} exceeds {MAX_CELL_PECLET}; refine the grid below Δx = {:e}",
                MAX_CELL_PECLET * d / u.abs()
            )));
        }
        q[(i + 1, i)] = (0.5 * u + d / dx) / dx;
        q[(i, i + 1)] = (-0.5 * u + d / dx) / dx;
    }
    for j in 0..cells {
        let off: f64 = (0..cells).filter(|&i| i != j).map(|i| q[(i, j)]).sum();
        q[(j, j)] = -off;
    }
    let generator = MarkovGenerator::new(q)?;
    let centers = (0..cells).map(|i| a + (i as f64 + 0.5) * dx).collect();
    Ok(FokkerPlanck { generator, centers, dx })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_diffusion_is_uniform() {
        let fp = fokker_planck_generator(&|_| 0.0, &|_| 1.0, 0.0, 1.0, 20).unwrap();
        for v in fp.generator.steady_state().iter() {
            assert!((v - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let err = fokker_planck_generator(&|x| -10.0 * x, &|_| 0.1, -5.0, 5.0, 10).unwrap_err();
        assert!(matches!(err, StochasticError::Discretization(_)));
    }
}
