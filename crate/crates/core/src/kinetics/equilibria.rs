//! Spatially homogeneous steady states of the density equation and their
//! linear stability.
//!
//! On constant fields both mechanisms collapse to the same scalar equation
//! `u' = -m u + (kappa u + beta u^2) exp(-u p)` with `p` the suppression
//! mass and `beta` the enhancement mass, so one analysis covers both.

use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Derivative of the rate at the steady state is zero to tolerance.
    Marginal,
}

#[derive(Clone, Copy, Debug)]
pub struct Equilibrium {
    pub density: f64,
    pub stability: Stability,
}

/// Scalar growth rate of the homogeneous reduction at density `u`.
pub fn homogeneous_rate(u: f64, params: &ModelParams) -> f64 {
    let p = params.suppression_kernel().l1_norm();
    let beta = params.enhancement_kernel().l1_norm();
    let kappa = params.fertility();
    -params.mortality() * u + (kappa * u + beta * u * u) * (-u * p).exp()
}

/// Derivative of [`homogeneous_rate`] in `u`, used to classify stability.
pub fn homogeneous_rate_derivative(u: f64, params: &ModelParams) -> f64 {
    let p = params.suppression_kernel().l1_norm();
    let beta = params.enhancement_kernel().l1_norm();
    let kappa = params.fertility();
    -params.mortality() + (-u * p).exp() * (kappa * (1.0 - u * p) + beta * u * (2.0 - u * p))
}

/// All nonnegative homogeneous steady states, in increasing density order.
///
/// Zero is always a steady state. Positive ones are roots of
/// `g(u) = exp(-u p)(kappa + beta u) - m`, located by a sign-change scan
/// followed by bisection; a tangential root (where `g` touches zero without
/// crossing) would be missed, but such instances sit on a measure-zero
/// parameter set. With zero suppression mass the equation degenerates to a
/// linear or constant `g` and is handled in closed form; when `g` vanishes
/// identically (contact rates with matching birth and death), only the zero
/// state is reported and it is marginal.
pub fn homogeneous_equilibria(params: &ModelParams) -> Vec<Equilibrium> {
    let p = params.suppression_kernel().l1_norm();
    let beta = params.enhancement_kernel().l1_norm();
    let kappa = params.fertility();
    let m = params.mortality();

    let mut out = vec![Equilibrium {
        density: 0.0,
        stability: classify(homogeneous_rate_derivative(0.0, params), m),
    }];

    let g = |u: f64| (-u * p).exp() * (kappa + beta * u) - m;

    if p == 0.0 {
        // Degenerate: g is affine in u.
        if beta > 0.0 && m > kappa {
            let root = (m - kappa) / beta;
            out.push(Equilibrium {
                density: root,
                stability: classify(homogeneous_rate_derivative(root, params), m),
            });
        }
        return out;
    }

    // The profile exp(-u p)(kappa + beta u) peaks once and then decays to
    // zero, so all roots sit below any point where g has fallen to -m/2.
    let peak = if beta > 0.0 {
        (1.0 / p - kappa / beta).max(0.0)
    } else {
        0.0
    };
    let mut upper = peak + 1.0;
    while g(upper) > -m / 2.0 && upper < 1e12 {
        upper *= 2.0;
    }

    let scan_points = 4096;
    let mut roots = Vec::new();
    let mut prev_u = 0.0;
    let mut prev_g = g(0.0);
    for i in 1..=scan_points {
        let u = upper * i as f64 / scan_points as f64;
        let gu = g(u);
        if prev_g == 0.0 && prev_u > 0.0 {
            roots.push(prev_u);
        } else if prev_g * gu < 0.0 {
            roots.push(bisect(&g, prev_u, u));
        }
        prev_u = u;
        prev_g = gu;
    }
    if prev_g == 0.0 {
        roots.push(prev_u);
    }

    for root in roots {
        if out
            .iter()
            .all(|e| (e.density - root).abs() > 1e-9 * (1.0 + root))
        {
            out.push(Equilibrium {
                density: root,
                stability: classify(homogeneous_rate_derivative(root, params), m),
            });
        }
    }
    out.sort_by(|a, b| a.density.total_cmp(&b.density));
    out
}

fn classify(rate_derivative: f64, mortality: f64) -> Stability {
    let tol = 1e-10 * mortality.max(1.0);
    if rate_derivative.abs() <= tol {
        Stability::Marginal
    } else if rate_derivative < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

fn bisect<F: Fn(f64) -> f64>(g: &F, mut lo: f64, mut hi: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if glo * gm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            glo = gm;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::model::{Dispersal, Mechanism};

    fn params(mortality: f64, fertility: f64, boost: f64, phi_height: f64) -> ModelParams {
        let enhancement = if boost == 0.0 {
            KernelSpec::zero(1)
        } else {
            KernelSpec::top_hat(1, boost, 0.5).unwrap()
        };
        let dispersal = if boost == 0.0 {
            Dispersal::Independent
        } else {
            Dispersal::DensityDependent
        };
        ModelParams::new(
            mortality,
            fertility,
            KernelSpec::top_hat(1, 1.0, 0.5).unwrap(),
            enhancement,
            KernelSpec::top_hat(1, phi_height, 0.5).unwrap(),
            Mechanism::Establishment,
            dispersal,
        )
        .unwrap()
    }

    #[test]
    fn doubled_fertility_equilibrates_at_log_two() {
        // kappa = 2m with unit suppression mass: the positive steady state is
        // exactly ln 2.
        let params = params(1.0, 2.0, 0.0, 1.0);
        let eq = homogeneous_equilibria(&params);
        assert_eq!(eq.len(), 2);
        assert_eq!(eq[0].stability, Stability::Unstable);
        assert!(
            (eq[1].density - std::f64::consts::LN_2).abs() < 1e-12,
            "positive equilibrium {} should be ln 2",
            eq[1].density
        );
        assert_eq!(eq[1].stability, Stability::Stable);
    }

    #[test]
    fn subcritical_fertility_leaves_only_extinction() {
        let params = params(2.0, 1.0, 0.0, 1.0);
        let eq = homogeneous_equilibria(&params);
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].density, 0.0);
        assert_eq!(eq[0].stability, Stability::Stable);
    }

    #[test]
    fn enhancement_can_create_a_bistable_pair() {
        // Subcritical fertility, strong enhancement: the humped profile
        // crosses the mortality level twice.
        let params = params(2.0, 1.0, 8.0, 1.0);
        let eq = homogeneous_equilibria(&params);
        assert_eq!(eq.len(), 3, "expected 0 and two positive states");
        assert_eq!(eq[0].stability, Stability::Stable);
        assert_eq!(eq[1].stability, Stability::Unstable);
        assert_eq!(eq[2].stability, Stability::Stable);
        for e in &eq[1..] {
            assert!(
                homogeneous_rate(e.density, &params).abs() < 1e-10,
                "rate must vanish at a steady state"
            );
        }
    }

    #[test]
    fn rate_derivative_matches_difference_quotient() {
        let params = params(1.5, 3.0, 2.0, 0.7);
        for &u in &[0.1, 0.8, 2.3] {
            let h = 1e-6;
            let numeric =
                (homogeneous_rate(u + h, &params) - homogeneous_rate(u - h, &params)) / (2.0 * h);
            let closed = homogeneous_rate_derivative(u, &params);
            assert!(
                (numeric - closed).abs() < 1e-6 * (1.0 + closed.abs()),
                "derivative mismatch at u = {u}: {numeric} vs {closed}"
            );
        }
    }
}
