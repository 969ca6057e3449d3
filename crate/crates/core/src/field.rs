//! Grids and discretized state fields.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CdfError;

/// Ghost-state rule for a feedback-controlled boundary.
pub trait GhostRule: Send + Sync {
    /// Writes the ghost state given the adjacent interior cell.
    fn ghost(&self, interior: &[f64], time: f64, out: &mut [f64]);
}

#[derive(Clone)]
pub enum Boundary {
    Periodic,
    /// Zeroth-order extrapolation.
    Outflow,
    /// Fixed ghost state.
    Dirichlet(Vec<f64>),
    Feedback(Arc<dyn GhostRule>),
}

impl core::fmt::Debug for Boundary {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("Periodic"),
            Boundary::Outflow => f.write_str("Outflow"),
            Boundary::Dirichlet(v) => f.debug_tuple("Dirichlet").field(v).finish(),
            Boundary::Feedback(_) => f.write_str("Feedback(..)"),
        }
    }
}

/// Uniform cell-centred grid on `[x_left, x_right]`.
#[derive(Debug, Clone)]
pub struct Grid1D {
    pub x_left: f64,
    pub x_right: f64,
    pub cells: usize,
    pub left: Boundary,
    pub right: Boundary,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, cells: usize, left: Boundary, right: Boundary) -> Result<Self, CdfError> {
        if cells < 4 {
            return Err(CdfError::Configuration(format!("need at least 4 cells, got {cells}")));
        }
        if !(x_right > x_left) || !x_left.is_finite() || !x_right.is_finite() {
            return Err(CdfError::Configuration(format!("empty domain [{x_left}, {x_right}]")));
        }
        let periodic_l = matches!(left, Boundary::Periodic);
        let periodic_r = matches!(right, Boundary::Periodic);
        if periodic_l != periodic_r {
            return Err(CdfError::Configuration("periodic boundaries must be paired".into()));
        }
        Ok(Self { x_left, x_right, cells, left, right })
    }

    pub fn periodic(x_left: f64, x_right: f64, cells: usize) -> Result<Self, CdfError> {
        Self::new(x_left, x_right, cells, Boundary::Periodic, Boundary::Periodic)
    }

    pub fn dx(&self) -> f64 {
        (self.x_right - self.x_left) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.left, Boundary::Periodic)
    }

    /// Same cells on the same interval.
    pub fn same_geometry(&self, other: &Grid1D) -> bool {
        self.cells == other.cells && self.x_left == other.x_left && self.x_right == other.x_right
    }
}

/// Per-cell states `U_i ∈ R^dim`, stored cell-major.
#[derive(Debug, Clone)]
pub struct StateField {
    pub grid: Grid1D,
    pub dim: usize,
    pub data: Vec<f64>,
    pub time: f64,
}

impl StateField {
    pub fn uniform(grid: Grid1D, state: &[f64]) -> Self {
        let mut data = Vec::with_capacity(grid.cells * state.len());
        for _ in 0..grid.cells {
            data.extend_from_slice(state);
        }
        Self { dim: state.len(), grid, data, time: 0.0 }
    }

    /// Fills each cell from its centre coordinate.
    pub fn from_fn(grid: Grid1D, dim: usize, f: impl Fn(f64, &mut [f64])) -> Self {
        let mut data = vec![0.0; grid.cells * dim];
        for i in 0..grid.cells {
            f(grid.center(i), &mut data[i * dim..(i + 1) * dim]);
        }
        Self { grid, dim, data, time: 0.0 }
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Values of component `k` across the grid.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.cells().map(|c| c[k]).collect()
    }

    /// `Σ_i U_i[k]·Δx`.
    pub fn total(&self, k: usize) -> f64 {
        self.cells().map(|c| c[k]).sum::<f64>() * self.grid.dx()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `sqrt(Σ_i ‖U_a,i − U_b,i‖²·Δx)`.
pub fn l2_distance(a: &StateField, b: &StateField) -> Result<f64, CdfError> {
    if !a.grid.same_geometry(&b.grid) || a.dim != b.dim {
        return Err(CdfError::Configuration("fields live on different grids".into()));
    }
    let ss: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(ss * a.grid.dx()))
}

/// L² distance of a field to a constant state.
pub fn l2_to_state(a: &StateField, state: &[f64]) -> f64 {
    let ss: f64 = a
        .cells()
        .map(|c| c.iter().zip(state).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        .sum();
    libm::sqrt(ss * a.grid.dx())
}
