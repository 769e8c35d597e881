//! Random displacement draws matching each kernel's normalized shape, plus
//! Poisson seeding of the domain.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

use crate::error::{CoreError, Result};
use crate::geometry::Point;
use crate::kernels::{KernelFamily, KernelSpec};

const MAX_RESAMPLES: usize = 10_000;

/// Draw a displacement whose law is the kernel normalized to a probability
/// density, truncated at the kernel's range. Truncation loses at most the
/// kernel's stored tail fraction of mass for the smooth families and nothing
/// for the compact ones.
pub fn sample_displacement<R: Rng + ?Sized>(kernel: &KernelSpec, rng: &mut R) -> Result<Point> {
    let dim = kernel.dim();
    if dim > 2 {
        return Err(CoreError::InvalidArgument(format!(
            "displacement sampling supports dimensions 1 and 2, got {dim}"
        )));
    }
    let cutoff = kernel.support_radius();
    match *kernel.family() {
        KernelFamily::Zero => Err(CoreError::InvalidArgument(
            "cannot draw displacements from a kernel that vanishes identically".into(),
        )),
        KernelFamily::TopHat { radius, .. } => {
            let r = match dim {
                1 => radius * rng.random::<f64>(),
                _ => radius * rng.random::<f64>().sqrt(),
            };
            Ok(random_direction(dim, r, rng))
        }
        KernelFamily::Gaussian { sigma, .. } => {
            let normal = Normal::new(0.0, sigma).expect("validated scale");
            for _ in 0..MAX_RESAMPLES {
                let mut p: Point = [0.0; 3];
                let mut sq = 0.0;
                for coord in p.iter_mut().take(dim) {
                    let v = normal.sample(rng);
                    *coord = v;
                    sq += v * v;
                }
                if sq.sqrt() <= cutoff {
                    return Ok(p);
                }
            }
            Err(CoreError::StructuralFailure(
                "displacement resampling failed to land inside the kernel range".into(),
            ))
        }
        KernelFamily::Exponential { scale, .. } => {
            let gamma = Gamma::new(dim as f64, scale).expect("validated shape and scale");
            for _ in 0..MAX_RESAMPLES {
                let r = gamma.sample(rng);
                if r <= cutoff {
                    return Ok(random_direction(dim, r, rng));
                }
            }
            Err(CoreError::StructuralFailure(
                "displacement resampling failed to land inside the kernel range".into(),
            ))
        }
        KernelFamily::PowerLaw { exponent, .. } => {
            if !cutoff.is_finite() {
                return Err(CoreError::InvalidArgument(
                    "sampling a power-law kernel needs a finite range".into(),
                ));
            }
            match dim {
                1 => {
                    // Inverse transform for density (1+r)^(-e) on [0, cutoff].
                    let tail = (1.0 + cutoff).powf(1.0 - exponent);
                    let u: f64 = rng.random();
                    let t = (1.0 - u) + u * tail;
                    let r = t.powf(1.0 / (1.0 - exponent)) - 1.0;
                    Ok(random_direction(1, r.clamp(0.0, cutoff), rng))
                }
                _ => {
                    // Density r (1+r)^(-e): propose from (1+r)^(1-e) by inverse
                    // transform, accept with probability r / (1+r).
                    let tail = (1.0 + cutoff).powf(2.0 - exponent);
                    for _ in 0..MAX_RESAMPLES {
                        let u: f64 = rng.random();
                        let t = (1.0 - u) + u * tail;
                        let r = (t.powf(1.0 / (2.0 - exponent)) - 1.0).clamp(0.0, cutoff);
                        if rng.random::<f64>() * (1.0 + r) < r {
                            return Ok(random_direction(2, r, rng));
                        }
                    }
                    Err(CoreError::StructuralFailure(
                        "displacement resampling failed to land inside the kernel range".into(),
                    ))
                }
            }
        }
    }
}

fn random_direction<R: Rng + ?Sized>(dim: usize, r: f64, rng: &mut R) -> Point {
    match dim {
        1 => {
            if rng.random::<bool>() {
                [r, 0.0, 0.0]
            } else {
                [-r, 0.0, 0.0]
            }
        }
        _ => {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            [r * theta.cos(), r * theta.sin(), 0.0]
        }
    }
}

/// Sample a homogeneous Poisson point pattern of the given intensity on
/// `[0, length)^dim`.
pub fn poisson_points<R: Rng + ?Sized>(
    intensity: f64,
    length: f64,
    dim: usize,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "intensity must be finite and nonnegative, got {intensity}"
        )));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "domain length must be finite and positive, got {length}"
        )));
    }
    let lambda = intensity * length.powi(dim as i32);
    if lambda == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(lambda)
        .map_err(|e| CoreError::InvalidArgument(format!("invalid seeding intensity: {e}")))?
        .sample(rng) as usize;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p: Point = [0.0; 3];
        for coord in p.iter_mut().take(dim) {
            *coord = rng.random_range(0.0..length);
        }
        points.push(p);
    }
    Ok(points)
}
