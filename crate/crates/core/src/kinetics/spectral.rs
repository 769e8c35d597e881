//! Circular convolution on the periodic grid, evaluated through the FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};
use crate::kernels::KernelSpec;
use crate::kinetics::{DensityField, Grid};

/// Precomputed spectral multiplier for convolving grid fields with one kernel.
///
/// The kernel is sampled at minimal-image cell-center displacements and the
/// sample weights are rescaled so their sum matches the kernel's exact
/// integral; a unit-mass kernel therefore keeps discrete convolutions
/// mass-preserving to rounding error.
pub struct Convolver {
    grid: Grid,
    zero: bool,
    mass: f64,
    kernel_hat: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("grid", &self.grid)
            .field("zero", &self.zero)
            .field("mass", &self.mass)
            .finish()
    }
}

impl Convolver {
    pub fn new(kernel: &KernelSpec, grid: Grid) -> Result<Self> {
        if kernel.dim() != grid.dim() {
            return Err(CoreError::InvalidDomain(format!(
                "kernel dimension {} does not match grid dimension {}",
                kernel.dim(),
                grid.dim()
            )));
        }
        let mut planner = FftPlanner::new();
        let n = grid.cells_per_dim();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let exact_mass = kernel.l1_norm();
        if exact_mass == 0.0 {
            return Ok(Convolver {
                grid,
                zero: true,
                mass: 0.0,
                kernel_hat: Vec::new(),
                fwd,
                inv,
            });
        }

        let radius = kernel.support_radius();
        if !(radius < grid.length() / 2.0) {
            return Err(CoreError::InvalidDomain(format!(
                "kernel support radius {radius} must stay below half the domain length {}",
                grid.length()
            )));
        }

        let cells = grid.cell_count();
        let mut samples = vec![0.0; cells];
        let mut sum = 0.0;
        for (idx, s) in samples.iter_mut().enumerate() {
            let r = match grid.dim() {
                1 => grid.offset_coordinate(idx).abs(),
                _ => {
                    let dx = grid.offset_coordinate(idx / n);
                    let dy = grid.offset_coordinate(idx % n);
                    (dx * dx + dy * dy).sqrt()
                }
            };
            *s = kernel.evaluate_radial(r);
            sum += *s;
        }
        if sum <= 0.0 {
            return Err(CoreError::InvalidDomain(format!(
                "grid spacing {} is too coarse to resolve a kernel of support radius {radius}",
                grid.spacing()
            )));
        }

        // Rescale so the discrete weights integrate to the exact kernel mass.
        let weight = exact_mass / sum;
        let mut kernel_hat: Vec<Complex<f64>> = samples
            .into_iter()
            .map(|s| Complex::new(s * weight, 0.0))
            .collect();
        forward_transform(grid.dim(), n, fwd.as_ref(), &mut kernel_hat);

        Ok(Convolver {
            grid,
            zero: false,
            mass: exact_mass,
            kernel_hat,
            fwd,
            inv,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// True when the kernel vanishes identically; `apply` then returns zeros.
    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Exact integral of the kernel; the discrete weights sum to this.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Convolution of `field` with the kernel, periodic over the domain.
    pub fn apply(&self, field: &DensityField) -> DensityField {
        assert_eq!(
            field.grid(),
            &self.grid,
            "field grid must match the convolver grid"
        );
        if self.zero {
            return DensityField::constant(self.grid, 0.0);
        }
        let n = self.grid.cells_per_dim();
        let mut buf: Vec<Complex<f64>> = field
            .values()
            .iter()
            .map(|v| Complex::new(*v, 0.0))
            .collect();
        forward_transform(self.grid.dim(), n, self.fwd.as_ref(), &mut buf);
        for (b, k) in buf.iter_mut().zip(self.kernel_hat.iter()) {
            *b *= *k;
        }
        inverse_transform(self.grid.dim(), n, self.inv.as_ref(), &mut buf);
        let scale = 1.0 / self.grid.cell_count() as f64;
        let values = buf.into_iter().map(|c| c.re * scale).collect();
        DensityField::from_values(self.grid, values).expect("convolution preserves field length")
    }
}

fn forward_transform(dim: usize, n: usize, fft: &dyn Fft<f64>, buf: &mut [Complex<f64>]) {
    fft.process(buf);
    if dim == 2 {
        transpose_square(n, buf);
        fft.process(buf);
        transpose_square(n, buf);
    }
}

fn inverse_transform(dim: usize, n: usize, fft: &dyn Fft<f64>, buf: &mut [Complex<f64>]) {
    fft.process(buf);
    if dim == 2 {
        transpose_square(n, buf);
        fft.process(buf);
        transpose_square(n, buf);
    }
}

fn transpose_square(n: usize, buf: &mut [Complex<f64>]) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Quadratic-cost reference convolution over minimal-image displacements,
    // using the same exact-mass rescaling as the spectral path.
    fn direct_convolution(kernel: &KernelSpec, field: &DensityField) -> Vec<f64> {
        let grid = *field.grid();
        let n = grid.cells_per_dim();
        let cells = grid.cell_count();
        let mut weights = vec![0.0; cells];
        let mut sum = 0.0;
        for (idx, w) in weights.iter_mut().enumerate() {
            let r = match grid.dim() {
                1 => grid.offset_coordinate(idx).abs(),
                _ => {
                    let dx = grid.offset_coordinate(idx / n);
                    let dy = grid.offset_coordinate(idx % n);
                    (dx * dx + dy * dy).sqrt()
                }
            };
            *w = kernel.evaluate_radial(r);
            sum += *w;
        }
        for w in weights.iter_mut() {
            *w *= kernel.l1_norm() / sum;
        }
        let mut out = vec![0.0; cells];
        match grid.dim() {
            1 => {
                for i in 0..cells {
                    let mut acc = 0.0;
                    for j in 0..cells {
                        acc += field.values()[j] * weights[(i + cells - j) % cells];
                    }
                    out[i] = acc;
                }
            }
            _ => {
                for ix in 0..n {
                    for iy in 0..n {
                        let mut acc = 0.0;
                        for jx in 0..n {
                            for jy in 0..n {
                                let ox = (ix + n - jx) % n;
                                let oy = (iy + n - jy) % n;
                                acc += field.values()[jx * n + jy] * weights[ox * n + oy];
                            }
                        }
                        out[ix * n + iy] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn spectral_matches_direct_in_one_dimension() {
        let kernel = KernelSpec::gaussian(1, 1.0, 0.4).unwrap();
        let grid = Grid::new(1, 128, 10.0).unwrap();
        let field = DensityField::from_fn(grid, |p| {
            1.0 + 0.5 * (2.0 * std::f64::consts::PI * p[0] / 10.0).sin() + 0.1 * (p[0] - 5.0).abs()
        });
        let conv = Convolver::new(&kernel, grid).unwrap();
        let spectral = conv.apply(&field);
        let direct = direct_convolution(&kernel, &field);
        for (a, b) in spectral.values().iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-10, "spectral {a} vs direct {b}");
        }
    }

    #[test]
    fn spectral_matches_direct_in_two_dimensions() {
        let kernel = KernelSpec::top_hat(2, 0.8, 0.9).unwrap();
        let grid = Grid::new(2, 32, 6.0).unwrap();
        let field = DensityField::from_fn(grid, |p| {
            1.0 + 0.3 * (p[0] - 3.0) * (p[1] - 2.0) / 9.0 + 0.2 * (p[1] / 6.0).cos()
        });
        let conv = Convolver::new(&kernel, grid).unwrap();
        let spectral = conv.apply(&field);
        let direct = direct_convolution(&kernel, &field);
        for (a, b) in spectral.values().iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-10, "spectral {a} vs direct {b}");
        }
    }

    #[test]
    fn unit_mass_kernel_preserves_mass_and_constants() {
        let kernel = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let conv = Convolver::new(&kernel, grid).unwrap();

        let constant = DensityField::constant(grid, 1.7);
        let out = conv.apply(&constant);
        for v in out.values() {
            assert!((v - 1.7).abs() < 1e-12, "constant field must be preserved");
        }

        let bump = DensityField::from_fn(grid, |p| if p[0] < 4.0 { 2.0 } else { 0.25 });
        let out = conv.apply(&bump);
        assert!((out.mass() - bump.mass()).abs() < 1e-10);
    }

    #[test]
    fn zero_kernel_yields_zero_field() {
        let kernel = KernelSpec::zero(1);
        let grid = Grid::new(1, 16, 4.0).unwrap();
        let conv = Convolver::new(&kernel, grid).unwrap();
        assert!(conv.is_zero());
        let field = DensityField::constant(grid, 3.0);
        assert_eq!(conv.apply(&field).sup_norm(), 0.0);
    }

    #[test]
    fn wide_kernel_is_rejected() {
        let kernel = KernelSpec::top_hat(1, 1.0, 3.0).unwrap();
        let grid = Grid::new(1, 16, 4.0).unwrap();
        let err = Convolver::new(&kernel, grid).unwrap_err();
        assert!(err.to_string().contains("half the domain length"));
    }

    #[test]
    fn sub_spacing_kernel_collapses_to_a_point_mass() {
        // Support radius far below the grid spacing: only the zero-offset
        // sample survives, and rescaling turns it into mass times identity.
        let kernel = KernelSpec::top_hat(1, 4.0, 0.01).unwrap();
        let grid = Grid::new(1, 16, 16.0).unwrap();
        let conv = Convolver::new(&kernel, grid).unwrap();
        let mass = kernel.l1_norm();
        let field = DensityField::from_fn(grid, |p| 1.0 + p[0]);
        let out = conv.apply(&field);
        for (o, f) in out.values().iter().zip(field.values().iter()) {
            assert!((o - mass * f).abs() < 1e-12);
        }
    }
}
