//! Combinatorial calculus on finite configurations.
//!
//! The correlation-function evolution of a birth-death model is driven by
//! set-indexed expansions of the birth rate. The central transform sends a
//! function `G` on finite configurations to `(KG)(gamma) = sum over finite
//! subsets eta of gamma of G(eta)`; its inverse is the signed subset sum
//! `(K^-1 F)(eta) = sum over xi subset of eta of (-1)^(|eta minus xi|) F(xi)`.
//!
//! For both regulation mechanisms the transform of the birth rate admits a
//! closed four-term expansion ([`kinv_birth_expansion`]). The same expansion
//! under mesoscopic weakening of the interactions, renormalized by the
//! density blow-up, is [`kinv_birth_expansion_scaled`]; its limit as the
//! scale parameter vanishes is the mean-field kernel
//! [`vlasov_limit_kernel`]. All three are validated against brute-force
//! signed subset sums in the test suites; the expansions are what the
//! kinetic theory is built from, so they are kept independent from the
//! brute-force path.

use rand::Rng;

use crate::configuration::{subset_masks, Configuration};
use crate::error::{CoreError, Result};
use crate::geometry::{Point, Space};
use crate::kernels::KernelSpec;
use crate::model::{Mechanism, ModelParams, RatePackage};

/// Interaction energy between a point and a configuration:
/// `sum over y in gamma, y != x, of phi(x - y)`.
pub fn interaction_energy(x: Point, gamma: &Configuration, phi: &KernelSpec) -> f64 {
    gamma
        .points()
        .iter()
        .filter(|&&y| y != x)
        .map(|&y| phi.evaluate(gamma.displacement(x, y)))
        .sum()
}

/// Product `prod over y in eta of f(y)`; empty product is one.
pub fn coherent_product<F: Fn(Point) -> f64>(f: F, eta: &Configuration) -> f64 {
    eta.points().iter().map(|&y| f(y)).product()
}

/// Total birth rate into `x` given the population `gamma` (unscaled model).
pub fn birth_rate(x: Point, gamma: &Configuration, params: &ModelParams) -> Result<f64> {
    birth_rate_scaled(x, gamma, &RatePackage::unscaled(params))
}

/// Total birth rate into `x` at mesoscopic scale `pkg.epsilon`: every kernel
/// is weakened by the scale factor (fertility and mortality untouched).
pub fn birth_rate_scaled(x: Point, gamma: &Configuration, pkg: &RatePackage) -> Result<f64> {
    let params = pkg.params;
    if gamma.dim() != params.dim() {
        return Err(CoreError::InvalidArgument(
            "configuration and model dimensions differ".into(),
        ));
    }
    let eps = pkg.epsilon;
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let kappa = params.fertility();
    let pts = gamma.points();

    let weight = |i: usize| -> f64 {
        let y = pts[i];
        let crowd: f64 = pts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &z)| b.evaluate(gamma.displacement(y, z)))
            .sum();
        kappa + eps * crowd
    };

    match params.mechanism() {
        Mechanism::Establishment => {
            let energy = interaction_energy(x, gamma, phi);
            let sum: f64 = (0..pts.len())
                .map(|i| eps * a.evaluate(gamma.displacement(x, pts[i])) * weight(i))
                .sum();
            Ok((-eps * energy).exp() * sum)
        }
        Mechanism::Fecundity => {
            let sum: f64 = (0..pts.len())
                .map(|i| {
                    let y = pts[i];
                    let energy = interaction_energy(y, gamma, phi);
                    (-eps * energy).exp()
                        * eps
                        * a.evaluate(gamma.displacement(x, y))
                        * weight(i)
                })
                .sum();
            Ok(sum)
        }
    }
}

/// `(KG)(gamma) = sum over sub-configurations eta of gamma of G(eta)`.
pub fn k_transform<G: FnMut(&Configuration) -> f64>(
    mut g: G,
    gamma: &Configuration,
) -> Result<f64> {
    gamma.check_transform_cap()?;
    let mut total = 0.0;
    for mask in subset_masks(gamma.len()) {
        total += g(&gamma.select(mask));
    }
    Ok(total)
}

/// `(K^-1 F)(eta) = sum over xi subset of eta of (-1)^(|eta| - |xi|) F(xi)`.
pub fn k_inverse<F: FnMut(&Configuration) -> f64>(mut f: F, eta: &Configuration) -> Result<f64> {
    eta.check_transform_cap()?;
    let n = eta.len();
    let mut total = 0.0;
    for mask in subset_masks(n) {
        let sub = eta.select(mask);
        let sign = if (n - sub.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * f(&sub);
    }
    Ok(total)
}

/// Inverse transform of a sum functional `F(gamma) = sum over x in gamma of
/// h(x, gamma minus x)`, evaluated through the term-by-term identity
/// `(K^-1 F)(eta) = sum over x in eta of (K^-1 h(x, .))(eta minus x)`.
pub fn k_inverse_sum_form<H: FnMut(Point, &Configuration) -> f64>(
    mut h: H,
    eta: &Configuration,
) -> Result<f64> {
    eta.check_transform_cap()?;
    let mut total = 0.0;
    for i in 0..eta.len() {
        let x = eta.point(i);
        let rest = eta.without(i);
        total += k_inverse(|sub| h(x, sub), &rest)?;
    }
    Ok(total)
}

fn check_expansion_args(
    x: Point,
    xi: &Configuration,
    eta: &Configuration,
    params: &ModelParams,
) -> Result<()> {
    if xi.space() != eta.space() || xi.dim() != eta.dim() {
        return Err(CoreError::InvalidArgument(
            "context and increment configurations must share one space".into(),
        ));
    }
    if xi.dim() != params.dim() {
        return Err(CoreError::InvalidArgument(
            "configuration and model dimensions differ".into(),
        ));
    }
    for p in xi.points() {
        if eta.points().contains(p) {
            return Err(CoreError::InvalidConfiguration(
                "context and increment configurations overlap".into(),
            ));
        }
    }
    if xi.points().contains(&x) || eta.points().contains(&x) {
        return Err(CoreError::InvalidConfiguration(
            "target point lies in the configuration".into(),
        ));
    }
    Ok(())
}

/// Closed-form value of the inverse transform of the birth rate in its
/// second argument: `(K^-1 b(x, xi union . ))(eta)` for the model's
/// mechanism. Requires `xi`, `eta` disjoint and `x` outside both.
pub fn kinv_birth_expansion(
    x: Point,
    xi: &Configuration,
    eta: &Configuration,
    params: &ModelParams,
) -> Result<f64> {
    check_expansion_args(x, xi, eta, params)?;
    Ok(match params.mechanism() {
        Mechanism::Establishment => establishment_expansion(x, xi, eta, params, 1.0, false),
        Mechanism::Fecundity => fecundity_expansion(x, xi, eta, params, 1.0, false),
    })
}

/// Mesoscopically scaled version of [`kinv_birth_expansion`]: kernels
/// weakened by `epsilon`, result renormalized by `epsilon^(-|eta|)`. At
/// `epsilon = 1` this coincides with the unscaled expansion; as
/// `epsilon -> 0` it converges, at first order, to
/// [`vlasov_limit_kernel`] uniformly in `xi`.
pub fn kinv_birth_expansion_scaled(
    x: Point,
    xi: &Configuration,
    eta: &Configuration,
    pkg: &RatePackage,
) -> Result<f64> {
    check_expansion_args(x, xi, eta, pkg.params)?;
    Ok(match pkg.params.mechanism() {
        Mechanism::Establishment => {
            establishment_expansion(x, xi, eta, pkg.params, pkg.epsilon, false)
        }
        Mechanism::Fecundity => fecundity_expansion(x, xi, eta, pkg.params, pkg.epsilon, false),
    })
}

/// Mean-field (small-scale limit) kernel: the limit of the scaled expansion,
/// which no longer depends on the context configuration `xi`.
pub fn vlasov_limit_kernel(
    x: Point,
    eta: &Configuration,
    params: &ModelParams,
) -> Result<f64> {
    let empty = Configuration::empty(eta.space(), eta.dim());
    check_expansion_args(x, &empty, eta, params)?;
    Ok(match params.mechanism() {
        Mechanism::Establishment => establishment_expansion(x, &empty, eta, params, 0.0, true),
        Mechanism::Fecundity => fecundity_expansion(x, &empty, eta, params, 0.0, true),
    })
}

/// `(exp(-eps * v) - 1) / eps`, continued to `-v` at `eps = 0`.
#[inline]
fn damped_increment(v: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        -v
    } else {
        (-eps * v).exp_m1() / eps
    }
}

/// Shared four-term expansion for the establishment mechanism.
///
/// With `q(z) = (exp(-eps phi(x-z)) - 1) / eps` and `s = exp(-eps E(x, xi))`:
///   t1 = eps * prod q * s * sum_{y in xi} a(x-y) (kappa + eps crowd_xi(y))
///   t2 = eps * s * sum_{z in eta} sum_{y in xi} a(x-y) b(y-z)
///          exp(-eps phi(x-z)) prod_{eta minus z} q
///   t3 = s * sum_{z in eta} prod_{eta minus z} q * a(x-z)
///          exp(-eps phi(x-z)) (kappa + eps sum_{y in xi} b(z-y))
///   t4 = s * sum_{z != z' in eta} a(x-z) b(z-z') exp(-eps phi(x-z))
//           exp(-eps phi(x-z')) prod_{eta minus z, z'} q
///
/// In `limit` mode (`eps = 0`) only t3 and t4 survive, with `q = -phi`,
/// `s = 1`, and bare `kappa`.
fn establishment_expansion(
    x: Point,
    xi: &Configuration,
    eta: &Configuration,
    params: &ModelParams,
    eps: f64,
    limit: bool,
) -> f64 {
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let kappa = params.fertility();
    let space = eta.space();
    let dim = eta.dim();
    let disp = |p: Point, q: Point| space.displacement(p, q, dim);

    let zs = eta.points();
    let ys = xi.points();
    let n = zs.len();

    let phi_x_eta: Vec<f64> = zs.iter().map(|&z| phi.evaluate(disp(x, z))).collect();
    let q: Vec<f64> = phi_x_eta
        .iter()
        .map(|&v| damped_increment(v, eps))
        .collect();
    let exf: Vec<f64> = phi_x_eta.iter().map(|&v| (-eps * v).exp()).collect();
    let a_x_eta: Vec<f64> = zs.iter().map(|&z| a.evaluate(disp(x, z))).collect();

    let prod_excluding = |skip: &[usize]| -> f64 {
        (0..n)
            .filter(|i| !skip.contains(i))
            .map(|i| q[i])
            .product()
    };

    let energy_x_xi: f64 = ys.iter().map(|&y| phi.evaluate(disp(x, y))).sum();
    let s = (-eps * energy_x_xi).exp();

    let mut t1 = 0.0;
    let mut t2 = 0.0;
    if !limit {
        let prod_all = prod_excluding(&[]);
        for (j, &y) in ys.iter().enumerate() {
            let crowd: f64 = ys
                .iter()
                .enumerate()
                .filter(|(j2, _)| *j2 != j)
                .map(|(_, &y2)| b.evaluate(disp(y, y2)))
                .sum();
            t1 += a.evaluate(disp(x, y)) * (kappa + eps * crowd);
        }
        t1 *= eps * prod_all * s;

        for (i, &z) in zs.iter().enumerate() {
            let mut inner = 0.0;
            for &y in ys {
                inner += a.evaluate(disp(x, y)) * b.evaluate(disp(y, z));
            }
            t2 += inner * exf[i] * prod_excluding(&[i]);
        }
        t2 *= eps * s;
    }

    let mut t3 = 0.0;
    for (i, &z) in zs.iter().enumerate() {
        let crowd_xi: f64 = ys.iter().map(|&y| b.evaluate(disp(z, y))).sum();
        t3 += prod_excluding(&[i]) * a_x_eta[i] * exf[i] * (kappa + eps * crowd_xi);
    }
    t3 *= s;

    let mut t4 = 0.0;
    for i in 0..n {
        for i2 in 0..n {
            if i2 == i {
                continue;
            }
            t4 += a_x_eta[i]
                * b.evaluate(disp(zs[i], zs[i2]))
                * exf[i]
                * exf[i2]
                * prod_excluding(&[i, i2]);
        }
    }
    t4 *= s;

    t1 + t2 + t3 + t4
}

/// Shared four-term expansion for the fecundity mechanism.
///
/// Here the damping is anchored at the parent `y`, so the coherent factors
/// `q_y(z) = (exp(-eps phi(y-z)) - 1) / eps` vary with the parent:
///   t1 = sum_{y in eta} exp(-eps E(y, xi)) prod_{eta minus y} q_y
///          * a(x-y) (kappa + eps sum_{y' in xi} b(y-y'))
///   t2 = sum_{y in eta} exp(-eps E(y, xi)) a(x-y) sum_{z in eta minus y}
///          b(y-z) exp(-eps phi(y-z)) prod_{eta minus y,z} q_y
///   t3 = eps * sum_{y in xi} prod_eta q_y * exp(-eps E(y, xi minus y))
///          * a(x-y) (kappa + eps sum_{y' in xi minus y} b(y-y'))
///   t4 = eps * sum_{z in eta} sum_{y in xi} exp(-eps E(y, xi minus y))
///          a(x-y) b(y-z) exp(-eps phi(y-z)) prod_{eta minus z} q_y
///
/// In `limit` mode only t1 and t2 survive with `q_y = -phi(y - .)`.
fn fecundity_expansion(
    x: Point,
    xi: &Configuration,
    eta: &Configuration,
    params: &ModelParams,
    eps: f64,
    limit: bool,
) -> f64 {
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let kappa = params.fertility();
    let space = eta.space();
    let dim = eta.dim();
    let disp = |p: Point, q: Point| space.displacement(p, q, dim);

    let zs = eta.points();
    let ys = xi.points();
    let n = zs.len();

    let mut total = 0.0;

    // Parent inside the increment configuration (t1 and t2).
    for (i, &y) in zs.iter().enumerate() {
        let energy_y_xi: f64 = ys.iter().map(|&y2| phi.evaluate(disp(y, y2))).sum();
        let s = (-eps * energy_y_xi).exp();
        let a_xy = a.evaluate(disp(x, y));
        if a_xy == 0.0 {
            continue;
        }
        let phi_y_eta: Vec<f64> = zs.iter().map(|&z| phi.evaluate(disp(y, z))).collect();
        let qy: Vec<f64> = phi_y_eta
            .iter()
            .map(|&v| damped_increment(v, eps))
            .collect();
        let prod_excluding = |skip: &[usize]| -> f64 {
            (0..n)
                .filter(|k| !skip.contains(k))
                .map(|k| qy[k])
                .product()
        };

        let crowd_xi: f64 = ys.iter().map(|&y2| b.evaluate(disp(y, y2))).sum();
        let t1 = s * prod_excluding(&[i]) * a_xy * (kappa + eps * crowd_xi);

        let mut t2 = 0.0;
        for (k, &z) in zs.iter().enumerate() {
            if k == i {
                continue;
            }
            t2 += b.evaluate(disp(y, z))
                * (-eps * phi_y_eta[k]).exp()
                * prod_excluding(&[i, k]);
        }
        t2 *= s * a_xy;

        total += t1 + t2;
    }

    // Parent inside the context configuration (t3 and t4); these terms are
    // scale-suppressed and absent from the limit.
    if !limit {
        for (j, &y) in ys.iter().enumerate() {
            let energy_y_rest: f64 = ys
                .iter()
                .enumerate()
                .filter(|(j2, _)| *j2 != j)
                .map(|(_, &y2)| phi.evaluate(disp(y, y2)))
                .sum();
            let s = (-eps * energy_y_rest).exp();
            let a_xy = a.evaluate(disp(x, y));
            let phi_y_eta: Vec<f64> = zs.iter().map(|&z| phi.evaluate(disp(y, z))).collect();
            let qy: Vec<f64> = phi_y_eta
                .iter()
                .map(|&v| damped_increment(v, eps))
                .collect();
            let prod_excluding = |skip: &[usize]| -> f64 {
                (0..n)
                    .filter(|k| !skip.contains(k))
                    .map(|k| qy[k])
                    .product()
            };

            let crowd_rest: f64 = ys
                .iter()
                .enumerate()
                .filter(|(j2, _)| *j2 != j)
                .map(|(_, &y2)| b.evaluate(disp(y, y2)))
                .sum();
            total += eps * prod_excluding(&[]) * s * a_xy * (kappa + eps * crowd_rest);

            let mut t4 = 0.0;
            for (k, &z) in zs.iter().enumerate() {
                t4 += b.evaluate(disp(y, z))
                    * (-eps * phi_y_eta[k]).exp()
                    * prod_excluding(&[k]);
            }
            total += eps * s * a_xy * t4;
        }
    }

    total
}

/// Monte Carlo estimate with standard error.
#[derive(Clone, Copy, Debug)]
pub struct LpEstimate {
    pub value: f64,
    pub stderr: f64,
}

fn sample_free_configuration<R: Rng>(
    n: usize,
    lo: f64,
    hi: f64,
    dim: usize,
    rng: &mut R,
) -> Configuration {
    loop {
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(dim) {
                    *c = rng.random_range(lo..hi);
                }
                p
            })
            .collect();
        // Coinciding samples have probability zero; retry if it happens.
        if let Ok(c) = Configuration::new(pts, Space::Free, dim) {
            return c;
        }
    }
}

/// Monte Carlo integral of `g` against the Poisson-weighted sum over
/// configuration sizes in the box `[lo, hi]^dim` with intensity `intensity`:
/// `sum_n (intensity^n / n!) int_{box^n} g({x_1..x_n}) dx`, truncated at
/// `n_max` points.
///
/// The `n = 0` stratum is exact; each positive stratum uses `samples`
/// independent draws, and the reported standard error combines the strata.
#[allow(clippy::too_many_arguments)]
pub fn lp_integral_mc<G: FnMut(&Configuration) -> f64, R: Rng>(
    mut g: G,
    intensity: f64,
    n_max: usize,
    samples: usize,
    lo: f64,
    hi: f64,
    dim: usize,
    rng: &mut R,
) -> Result<LpEstimate> {
    if !(intensity >= 0.0) || !(hi > lo) || samples == 0 {
        return Err(CoreError::InvalidArgument(
            "lp integral requires nonnegative intensity, hi > lo, samples > 0".into(),
        ));
    }
    let vol = (hi - lo).powi(dim as i32);
    let empty = Configuration::empty(Space::Free, dim);
    let mut value = g(&empty);
    let mut var = 0.0;
    let mut log_weight = 0.0;
    for n in 1..=n_max {
        // weight_n = intensity^n vol^n / n!
        log_weight += (intensity * vol / n as f64).ln();
        let weight = log_weight.exp();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let c = sample_free_configuration(n, lo, hi, dim, rng);
            let v = g(&c);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / samples as f64;
        let sample_var = (sum_sq / samples as f64 - mean * mean).max(0.0);
        value += weight * mean;
        var += weight * weight * sample_var / samples as f64;
    }
    Ok(LpEstimate {
        value,
        stderr: var.sqrt(),
    })
}

/// Double Poisson-weighted integral of `h(xi, eta, xi union eta)` over
/// independent configurations, each truncated at `n_max` points.
#[allow(clippy::too_many_arguments)]
pub fn lp_double_integral_mc<H, R: Rng>(
    mut h: H,
    intensity: f64,
    n_max: usize,
    samples: usize,
    lo: f64,
    hi: f64,
    dim: usize,
    rng: &mut R,
) -> Result<LpEstimate>
where
    H: FnMut(&Configuration, &Configuration, &Configuration) -> f64,
{
    if !(intensity >= 0.0) || !(hi > lo) || samples == 0 {
        return Err(CoreError::InvalidArgument(
            "lp integral requires nonnegative intensity, hi > lo, samples > 0".into(),
        ));
    }
    let vol = (hi - lo).powi(dim as i32);
    let log_w = |n: usize| -> f64 {
        (1..=n)
            .map(|k| (intensity * vol / k as f64).ln())
            .sum::<f64>()
    };
    let mut value = 0.0;
    let mut var = 0.0;
    for n1 in 0..=n_max {
        for n2 in 0..=n_max {
            let weight = (log_w(n1) + log_w(n2)).exp();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let draws = if n1 == 0 && n2 == 0 { 1 } else { samples };
            for _ in 0..draws {
                let c1 = sample_free_configuration(n1, lo, hi, dim, rng);
                let c2 = loop {
                    let c = sample_free_configuration(n2, lo, hi, dim, rng);
                    if c1.union(&c).is_ok() {
                        break c;
                    }
                };
                let union = c1.union(&c2).expect("disjoint by construction");
                let v = h(&c1, &c2, &union);
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / draws as f64;
            let sample_var = (sum_sq / draws as f64 - mean * mean).max(0.0);
            value += weight * mean;
            var += weight * weight * sample_var / draws as f64;
        }
    }
    Ok(LpEstimate {
        value,
        stderr: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dispersal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64) -> Point {
        [x, 0.0, 0.0]
    }

    fn test_params(mechanism: Mechanism) -> ModelParams {
        let a = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let b = KernelSpec::top_hat(1, 0.4, 0.6).unwrap();
        let phi = KernelSpec::top_hat(1, 0.9, 0.7).unwrap();
        ModelParams::new(
            0.8,
            1.3,
            a,
            b,
            phi,
            mechanism,
            Dispersal::DensityDependent,
        )
        .unwrap()
    }

    #[test]
    fn transform_roundtrip_recovers_function() {
        // K applied to K^-1 of F returns F pointwise.
        let gamma =
            Configuration::new(vec![pt(0.0), pt(0.3), pt(-0.2), pt(0.45)], Space::Free, 1)
                .unwrap();
        let f = |c: &Configuration| -> f64 {
            // An arbitrary smooth functional of the configuration.
            let s: f64 = c.points().iter().map(|p| (1.3 * p[0]).sin() + 0.7).sum();
            (0.3 * s).exp() + 0.1 * c.len() as f64
        };
        let recovered = k_transform(
            |eta| k_inverse(f, eta).unwrap(),
            &gamma,
        )
        .unwrap();
        assert!(
            (recovered - f(&gamma)).abs() < 1e-12,
            "roundtrip {recovered} vs {}",
            f(&gamma)
        );
    }

    #[test]
    fn transform_of_coherent_product_shifts_by_one() {
        // K applied to prod f equals prod (1 + f).
        let gamma =
            Configuration::new(vec![pt(0.1), pt(0.8), pt(-0.4)], Space::Free, 1).unwrap();
        let f = |p: Point| 0.5 * (p[0]).cos();
        let lhs = k_transform(|eta| coherent_product(f, eta), &gamma).unwrap();
        let rhs = coherent_product(|p| 1.0 + f(p), &gamma);
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn sum_form_identity_matches_direct_inverse() {
        let eta = Configuration::new(
            vec![pt(0.0), pt(0.25), pt(-0.33), pt(0.6), pt(-0.7)],
            Space::Free,
            1,
        )
        .unwrap();
        let h = |x: Point, c: &Configuration| -> f64 {
            let s: f64 = c.points().iter().map(|p| (x[0] - p[0]).cos()).sum();
            (x[0]).sin() * (0.4 * s).exp()
        };
        let direct = k_inverse(
            |gamma| {
                (0..gamma.len())
                    .map(|i| h(gamma.point(i), &gamma.without(i)))
                    .sum()
            },
            &eta,
        )
        .unwrap();
        let term_by_term = k_inverse_sum_form(h, &eta).unwrap();
        assert!(
            (direct - term_by_term).abs() < 1e-12,
            "{direct} vs {term_by_term}"
        );
    }

    #[test]
    fn cardinality_cap_is_enforced() {
        let pts: Vec<Point> = (0..13).map(|i| pt(i as f64 * 0.1)).collect();
        let gamma = Configuration::new(pts, Space::Free, 1).unwrap();
        assert!(matches!(
            k_inverse(|_| 1.0, &gamma),
            Err(CoreError::CardinalityLimit { .. })
        ));
    }

    fn brute_force_expansion(
        x: Point,
        xi: &Configuration,
        eta: &Configuration,
        pkg: &RatePackage,
    ) -> f64 {
        let n = eta.len();
        let mut total = 0.0;
        for mask in subset_masks(n) {
            let sub = eta.select(mask);
            let sign = if (n - sub.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
            let gamma = xi.union(&sub).unwrap();
            total += sign * birth_rate_scaled(x, &gamma, pkg).unwrap();
        }
        total * pkg.epsilon.powi(-(n as i32))
    }

    #[test]
    fn establishment_expansion_single_point_hand_value() {
        let params = test_params(Mechanism::Establishment);
        let xi = Configuration::empty(Space::Free, 1);
        let eta = Configuration::new(vec![pt(0.3)], Space::Free, 1).unwrap();
        let x = pt(0.0);
        let v = kinv_birth_expansion(x, &xi, &eta, &params).unwrap();
        // Single parent: kappa * a(x-y) * exp(-phi(x-y)).
        let expected = 1.3 * 1.0 * (-0.9f64).exp();
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
    }

    #[test]
    fn expansions_match_brute_force_both_mechanisms() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for mechanism in [Mechanism::Establishment, Mechanism::Fecundity] {
            let params = test_params(mechanism);
            for _ in 0..40 {
                let n_xi = rng.random_range(0..3usize);
                let n_eta = rng.random_range(0..4usize);
                let mut pts: Vec<Point> = Vec::new();
                while pts.len() < n_xi + n_eta + 1 {
                    let p = pt(rng.random_range(-1.0..1.0));
                    if !pts.contains(&p) {
                        pts.push(p);
                    }
                }
                let x = pts[0];
                let xi =
                    Configuration::new(pts[1..1 + n_xi].to_vec(), Space::Free, 1).unwrap();
                let eta =
                    Configuration::new(pts[1 + n_xi..].to_vec(), Space::Free, 1).unwrap();
                let pkg = RatePackage::unscaled(&params);
                let closed = kinv_birth_expansion(x, &xi, &eta, &params).unwrap();
                let brute = brute_force_expansion(x, &xi, &eta, &pkg);
                assert!(
                    (closed - brute).abs() <= 1e-11,
                    "{mechanism:?}: closed {closed} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn scaled_expansion_matches_brute_force_at_half_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mechanism in [Mechanism::Establishment, Mechanism::Fecundity] {
            let params = test_params(mechanism);
            for _ in 0..20 {
                let n_xi = rng.random_range(0..3usize);
                let n_eta = rng.random_range(1..4usize);
                let mut pts: Vec<Point> = Vec::new();
                while pts.len() < n_xi + n_eta + 1 {
                    let p = pt(rng.random_range(-1.0..1.0));
                    if !pts.contains(&p) {
                        pts.push(p);
                    }
                }
                let x = pts[0];
                let xi =
                    Configuration::new(pts[1..1 + n_xi].to_vec(), Space::Free, 1).unwrap();
                let eta =
                    Configuration::new(pts[1 + n_xi..].to_vec(), Space::Free, 1).unwrap();
                let pkg = RatePackage::new(&params, 0.5).unwrap();
                let closed = kinv_birth_expansion_scaled(x, &xi, &eta, &pkg).unwrap();
                let brute = brute_force_expansion(x, &xi, &eta, &pkg);
                assert!(
                    (closed - brute).abs() <= 1e-11,
                    "{mechanism:?}: scaled {closed} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn scaled_expansion_at_unit_scale_equals_plain() {
        let params = test_params(Mechanism::Fecundity);
        let xi = Configuration::new(vec![pt(0.2)], Space::Free, 1).unwrap();
        let eta = Configuration::new(vec![pt(-0.1), pt(0.5)], Space::Free, 1).unwrap();
        let x = pt(0.05);
        let pkg = RatePackage::unscaled(&params);
        let plain = kinv_birth_expansion(x, &xi, &eta, &params).unwrap();
        let scaled = kinv_birth_expansion_scaled(x, &xi, &eta, &pkg).unwrap();
        assert!((plain - scaled).abs() < 1e-14);
    }

    #[test]
    fn scaled_expansion_converges_linearly_to_limit() {
        for mechanism in [Mechanism::Establishment, Mechanism::Fecundity] {
            let params = test_params(mechanism);
            let xi = Configuration::new(vec![pt(0.4), pt(-0.6)], Space::Free, 1).unwrap();
            let eta = Configuration::new(vec![pt(-0.1), pt(0.2)], Space::Free, 1).unwrap();
            let x = pt(0.0);
            let limit = vlasov_limit_kernel(x, &eta, &params).unwrap();
            let mut prev_err = f64::INFINITY;
            for eps in [0.1, 0.01, 0.001] {
                let pkg = RatePackage::new(&params, eps).unwrap();
                let v = kinv_birth_expansion_scaled(x, &xi, &eta, &pkg).unwrap();
                let err = (v - limit).abs();
                // Error shrinks by roughly the scale ratio at each step.
                assert!(err < prev_err * 0.15, "{mechanism:?}: eps {eps} err {err}");
                prev_err = err;
            }
        }
    }

    #[test]
    fn lp_integral_of_coherent_product_matches_exponential() {
        // int prod f d(lambda) = exp(intensity * int f) for f supported in the box.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f_kernel = KernelSpec::top_hat(1, 0.8, 0.4).unwrap();
        let est = lp_integral_mc(
            |c| coherent_product(|p| f_kernel.evaluate(p), c),
            1.0,
            12,
            20_000,
            -0.5,
            0.5,
            1,
            &mut rng,
        )
        .unwrap();
        let expected = (1.0f64 * f_kernel.l1_norm()).exp();
        assert!(
            (est.value - expected).abs() < 4.0 * est.stderr.max(1e-4),
            "estimate {} +- {} vs {expected}",
            est.value,
            est.stderr
        );
    }
}
