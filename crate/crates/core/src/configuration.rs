//! Finite point configurations.
//!
//! A configuration is a finite set of distinct points in the ambient space.
//! Points are stored in insertion order; set semantics are enforced by
//! rejecting exact duplicates at construction. Subset enumeration is
//! bitmask-based and therefore capped at [`MAX_TRANSFORM_POINTS`] points,
//! which keeps the combinatorial transforms exact and the running time
//! bounded.

use crate::error::{CoreError, Result};
use crate::geometry::{Point, Space};

/// Hard cap for subset-enumerating transforms (2^12 = 4096 subsets).
pub const MAX_TRANSFORM_POINTS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    points: Vec<Point>,
    space: Space,
    dim: usize,
}

impl Configuration {
    pub fn new(points: Vec<Point>, space: Space, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(CoreError::InvalidConfiguration(format!(
                "dimension must be 1, 2, or 3, got {dim}"
            )));
        }
        let mut wrapped = Vec::with_capacity(points.len());
        for p in points {
            for (axis, c) in p.iter().enumerate() {
                if !c.is_finite() {
                    return Err(CoreError::InvalidConfiguration(format!(
                        "coordinate {axis} is not finite"
                    )));
                }
                if axis >= dim && *c != 0.0 {
                    return Err(CoreError::InvalidConfiguration(format!(
                        "coordinate {axis} must be zero in dimension {dim}"
                    )));
                }
            }
            wrapped.push(space.wrap(p, dim));
        }
        for i in 0..wrapped.len() {
            for j in (i + 1)..wrapped.len() {
                if wrapped[i] == wrapped[j] {
                    return Err(CoreError::InvalidConfiguration(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Configuration {
            points: wrapped,
            space,
            dim,
        })
    }

    pub fn empty(space: Space, dim: usize) -> Self {
        Configuration {
            points: Vec::new(),
            space,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    /// Displacement `a - b` in the configuration's space.
    #[inline]
    pub fn displacement(&self, a: Point, b: Point) -> Point {
        self.space.displacement(a, b, self.dim)
    }

    /// Sub-configuration selected by a bitmask over point indices.
    pub fn select(&self, mask: u32) -> Configuration {
        let points = (0..self.points.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.points[i])
            .collect();
        Configuration {
            points,
            space: self.space,
            dim: self.dim,
        }
    }

    /// The configuration with point `i` removed.
    pub fn without(&self, i: usize) -> Configuration {
        let mut points = self.points.clone();
        points.remove(i);
        Configuration {
            points,
            space: self.space,
            dim: self.dim,
        }
    }

    /// Disjoint union with another configuration over the same space.
    pub fn union(&self, other: &Configuration) -> Result<Configuration> {
        if self.space != other.space || self.dim != other.dim {
            return Err(CoreError::InvalidConfiguration(
                "union requires identical spaces".into(),
            ));
        }
        let mut points = self.points.clone();
        for p in &other.points {
            if self.points.contains(p) {
                return Err(CoreError::InvalidConfiguration(
                    "union of overlapping configurations".into(),
                ));
            }
            points.push(*p);
        }
        Ok(Configuration {
            points,
            space: self.space,
            dim: self.dim,
        })
    }

    /// Checks the subset-enumeration cap.
    pub fn check_transform_cap(&self) -> Result<()> {
        if self.points.len() > MAX_TRANSFORM_POINTS {
            Err(CoreError::CardinalityLimit {
                n: self.points.len(),
                cap: MAX_TRANSFORM_POINTS,
            })
        } else {
            Ok(())
        }
    }
}

/// Iterator over all bitmasks of an `n`-point configuration (requires
/// `n <= MAX_TRANSFORM_POINTS`).
pub fn subset_masks(n: usize) -> impl Iterator<Item = u32> {
    debug_assert!(n <= MAX_TRANSFORM_POINTS);
    0..(1u32 << n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> Point {
        [x, 0.0, 0.0]
    }

    #[test]
    fn rejects_duplicates_and_nonzero_padding() {
        let s = Space::Free;
        assert!(Configuration::new(vec![pt(0.1), pt(0.1)], s, 1).is_err());
        assert!(Configuration::new(vec![[0.1, 0.2, 0.0]], s, 1).is_err());
        assert!(Configuration::new(vec![[0.1, 0.2, 0.0]], s, 2).is_ok());
    }

    #[test]
    fn torus_points_are_wrapped() {
        let s = Space::torus(5.0).unwrap();
        let c = Configuration::new(vec![pt(-1.0), pt(6.0)], s, 1).unwrap();
        assert!((c.point(0)[0] - 4.0).abs() < 1e-12);
        assert!((c.point(1)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_and_without() {
        let s = Space::Free;
        let c = Configuration::new(vec![pt(0.0), pt(1.0), pt(2.0)], s, 1).unwrap();
        let sub = c.select(0b101);
        assert_eq!(sub.points(), &[pt(0.0), pt(2.0)]);
        let rem = c.without(1);
        assert_eq!(rem.points(), &[pt(0.0), pt(2.0)]);
    }

    #[test]
    fn union_disjointness() {
        let s = Space::Free;
        let a = Configuration::new(vec![pt(0.0)], s, 1).unwrap();
        let b = Configuration::new(vec![pt(1.0)], s, 1).unwrap();
        assert_eq!(a.union(&b).unwrap().len(), 2);
        assert!(a.union(&a).is_err());
    }

    #[test]
    fn subset_masks_count() {
        assert_eq!(subset_masks(3).count(), 8);
        assert_eq!(subset_masks(0).count(), 1);
    }
}
