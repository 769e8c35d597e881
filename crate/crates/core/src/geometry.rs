//! Points, displacements, and the ambient space.
//!
//! Positions are fixed-size `[f64; 3]` arrays; models with `dim < 3` keep the
//! unused trailing coordinates at exactly zero so norms and displacements work
//! uniformly in every dimension.

use crate::error::{CoreError, Result};

pub type Point = [f64; 3];

pub const ORIGIN: Point = [0.0, 0.0, 0.0];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[inline]
pub fn point_from_slice(coords: &[f64]) -> Point {
    let mut p = ORIGIN;
    for (i, c) in coords.iter().take(3).enumerate() {
        p[i] = *c;
    }
    p
}

/// Ambient space the particles live in.
///
/// `Free` is all of `R^d`. `Torus` is the box `[0, length)^d` with periodic
/// wrapping; displacements use the minimal image, so kernels with cutoff
/// below `length / 2` see each pair through at most one image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Space {
    Free,
    Torus { length: f64 },
}

impl Space {
    pub fn torus(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(CoreError::InvalidDomain(format!(
                "torus length must be finite and positive, got {length}"
            )));
        }
        Ok(Space::Torus { length })
    }

    /// Displacement `a - b`, reduced to the minimal image on a torus.
    #[inline]
    pub fn displacement(&self, a: Point, b: Point, dim: usize) -> Point {
        let mut d = sub(a, b);
        if let Space::Torus { length } = self {
            for c in d.iter_mut().take(dim) {
                *c -= length * (*c / length).round();
            }
        }
        d
    }

    #[inline]
    pub fn distance(&self, a: Point, b: Point, dim: usize) -> f64 {
        norm(self.displacement(a, b, dim))
    }

    /// Maps a point into the fundamental domain (identity in free space).
    #[inline]
    pub fn wrap(&self, mut p: Point, dim: usize) -> Point {
        if let Space::Torus { length } = self {
            for c in p.iter_mut().take(dim) {
                *c = c.rem_euclid(*length);
                // rem_euclid can return `length` itself when c is a tiny
                // negative number; fold that back to 0.
                if *c >= *length {
                    *c = 0.0;
                }
            }
        }
        p
    }
}

/// Surface area of the unit sphere in `R^d` (the angular factor in radial
/// integrals): 2, 2*pi, 4*pi for d = 1, 2, 3.
pub fn unit_sphere_surface(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Volume of the ball of radius `r` in `R^d`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    match dim {
        1 => 2.0 * r,
        2 => std::f64::consts::PI * r * r,
        3 => 4.0 / 3.0 * std::f64::consts::PI * r * r * r,
        _ => panic!("unsupported dimension {dim}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_image_picks_nearest_copy() {
        let s = Space::torus(10.0).unwrap();
        let d = s.displacement([9.5, 0.0, 0.0], [0.5, 0.0, 0.0], 1);
        assert!((d[0] - (-1.0)).abs() < 1e-12, "got {d:?}");
        let d = s.displacement([0.5, 9.0, 0.0], [9.5, 1.0, 0.0], 2);
        assert!((d[0] - 1.0).abs() < 1e-12 && (d[1] - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn free_space_displacement_is_plain_difference() {
        let s = Space::Free;
        let d = s.displacement([3.0, -1.0, 0.0], [1.0, 1.0, 0.0], 2);
        assert_eq!(d, [2.0, -2.0, 0.0]);
    }

    #[test]
    fn wrap_stays_in_fundamental_domain() {
        let s = Space::torus(4.0).unwrap();
        let p = s.wrap([-0.5, 4.5, 0.0], 2);
        assert!((p[0] - 3.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
        let q = s.wrap([-1e-17, 0.0, 0.0], 1);
        assert!(q[0] >= 0.0 && q[0] < 4.0);
    }

    #[test]
    fn ball_volumes() {
        assert!((ball_volume(1, 2.0) - 4.0).abs() < 1e-15);
        assert!((ball_volume(2, 1.0) - std::f64::consts::PI).abs() < 1e-15);
    }
}
