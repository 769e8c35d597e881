//! Deterministic solvers for the kinetic (mean-field) density equations.
//!
//! The limiting density of the rescaled particle system solves a
//! nonlocal equation whose right-hand side couples the density to itself
//! through kernel convolutions; the two regulation mechanisms place the
//! exponential suppression factor differently (outside the dispersal
//! convolution for establishment, inside it for fecundity).
//!
//! Fields live on a uniform periodic grid over `[0, L)^d`; convolutions are
//! circular and evaluated spectrally. Time stepping offers a fourth-order
//! Runge-Kutta scheme and an exponential Euler scheme that treats the linear
//! death exactly; a Picard iteration for the mild (integral) form of the
//! equation provides an independent solution path with per-iteration
//! contraction diagnostics.

mod equilibria;
mod picard;
mod solver;
mod spectral;

pub use equilibria::{
    homogeneous_equilibria, homogeneous_rate, homogeneous_rate_derivative, Equilibrium, Stability,
};
pub use picard::{picard_solve, PicardConfig, PicardIteration, PicardResult};
pub use solver::{integrate, KineticOps, KineticTrajectory, Scheme, SolverConfig};
pub use spectral::Convolver;

use crate::error::{CoreError, Result};
use crate::geometry::Point;

/// Uniform periodic grid: `cells_per_dim` cells of spacing `length / n` per
/// axis on `[0, length)^dim`, fields evaluated at cell centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells_per_dim: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, cells_per_dim: usize, length: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(CoreError::InvalidDomain(format!(
                "kinetic grids support dimensions 1 and 2, got {dim}"
            )));
        }
        if cells_per_dim < 4 {
            return Err(CoreError::InvalidDomain(format!(
                "grid needs at least 4 cells per dimension, got {cells_per_dim}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(CoreError::InvalidDomain(format!(
                "grid length must be finite and positive, got {length}"
            )));
        }
        Ok(Grid {
            dim,
            cells_per_dim,
            length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.cells_per_dim as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Center of the flat-indexed cell (row-major in two dimensions).
    pub fn center(&self, idx: usize) -> Point {
        let h = self.spacing();
        match self.dim {
            1 => [(idx as f64 + 0.5) * h, 0.0, 0.0],
            _ => {
                let n = self.cells_per_dim;
                let (i, j) = (idx / n, idx % n);
                [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h, 0.0]
            }
        }
    }

    /// Signed displacement coordinate for an index offset, wrapped to the
    /// minimal image.
    pub fn offset_coordinate(&self, offset: usize) -> f64 {
        let mut d = offset as f64 * self.spacing();
        if d > self.length / 2.0 {
            d -= self.length;
        }
        d
    }
}

/// A scalar field sampled at the cell centers of a [`Grid`].
#[derive(Clone, Debug)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn constant(grid: Grid, value: f64) -> Self {
        DensityField {
            values: vec![value; grid.cell_count()],
            grid,
        }
    }

    pub fn from_fn<F: Fn(Point) -> f64>(grid: Grid, f: F) -> Self {
        let values = (0..grid.cell_count()).map(|i| f(grid.center(i))).collect();
        DensityField { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(CoreError::InvalidArgument(format!(
                "field length {} does not match grid cell count {}",
                values.len(),
                grid.cell_count()
            )));
        }
        Ok(DensityField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Integral of the field over the domain.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Largest absolute difference to another field on the same grid.
    pub fn sup_distance(&self, other: &DensityField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_centers_and_volumes() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        assert!((g.spacing() - 0.5).abs() < 1e-15);
        assert_eq!(g.cell_count(), 8);
        assert!((g.center(0)[0] - 0.25).abs() < 1e-15);

        let g2 = Grid::new(2, 4, 2.0).unwrap();
        assert_eq!(g2.cell_count(), 16);
        let c = g2.center(4 + 1);
        assert!((c[0] - 0.75).abs() < 1e-15 && (c[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn offset_coordinates_wrap() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        assert!((g.offset_coordinate(1) - 0.5).abs() < 1e-15);
        assert!((g.offset_coordinate(7) - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn field_norms() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        let f = DensityField::from_fn(g, |p| p[0]);
        assert!((f.mass() - 8.0).abs() < 1e-12);
        assert!((f.sup_norm() - 3.75).abs() < 1e-15);
    }
}
