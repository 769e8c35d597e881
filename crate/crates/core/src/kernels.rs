//! Radial interaction kernels and their derived constants.
//!
//! Every model ingredient (dispersal `a+`, crowding enhancement `b+`,
//! suppression `phi`) is a nonnegative, integrable, radially symmetric kernel
//! from one of four families, plus the zero kernel. Kernels carry a hard
//! cutoff radius: evaluation beyond the cutoff is exactly zero, which is what
//! makes cell-list neighbor search in the simulator exact. For the families
//! with unbounded support the constructor picks a cutoff whose discarded tail
//! mass is below `1e-10` of the total, so analytic moments remain valid to
//! that accuracy.
//!
//! Besides evaluation and moments, this module computes the domination
//! constants used by the sufficient-condition checks: the best constant in
//! `num(x) <= A * den(x)` (optionally with `den * exp(-den)` on the right),
//! and the pair constant in `a(u) * b(v) <= A2 * phi(u) * phi(u + v)`.
//! Exact closed forms are used where the family combination allows them;
//! otherwise a refined grid scan reports the constant together with a
//! convergence margin. When no finite constant exists (the left side is
//! positive somewhere the right side vanishes) the result is a structural
//! failure, not a number.

use crate::error::{CoreError, Result};
use crate::geometry::{ball_volume, norm, unit_sphere_surface, Point};
use crate::quadrature::{integrate, integrate_to_infinity};

/// Relative tail mass allowed beyond an automatically chosen cutoff.
pub const TAIL_FRACTION: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    /// Identically zero (an absent interaction).
    Zero,
    /// `height` on the closed ball of `radius`, zero outside.
    TopHat { height: f64, radius: f64 },
    /// Isotropic Gaussian with total mass `mass` and width `sigma`.
    Gaussian { mass: f64, sigma: f64 },
    /// `const * exp(-|x| / scale)`, normalized to total mass `mass`.
    Exponential { mass: f64, scale: f64 },
    /// `amplitude * (1 + |x|)^(-exponent)`; requires `exponent > dim`.
    PowerLaw { amplitude: f64, exponent: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    cutoff: f64,
}

/// Value of `int (1 - exp(-phi(x))) dx` with a degeneracy flag for the
/// identically-zero kernel (suppression switched off).
#[derive(Clone, Copy, Debug)]
pub struct EffectiveVolume {
    pub value: f64,
    pub degenerate: bool,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(CoreError::InvalidKernel(format!(
            "dimension must be 1, 2, or 3, got {dim}"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CoreError::InvalidKernel(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

impl KernelSpec {
    /// The identically-zero kernel. Panics if `dim` is not 1, 2, or 3.
    pub fn zero(dim: usize) -> Self {
        check_dim(dim).expect("valid dimension");
        KernelSpec {
            family: KernelFamily::Zero,
            dim,
            cutoff: 0.0,
        }
    }

    pub fn top_hat(dim: usize, height: f64, radius: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("top-hat height", height)?;
        check_positive("top-hat radius", radius)?;
        Ok(KernelSpec {
            family: KernelFamily::TopHat { height, radius },
            dim,
            cutoff: radius,
        })
    }

    pub fn gaussian(dim: usize, mass: f64, sigma: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("gaussian mass", mass)?;
        check_positive("gaussian sigma", sigma)?;
        let mut k = KernelSpec {
            family: KernelFamily::Gaussian { mass, sigma },
            dim,
            cutoff: f64::INFINITY,
        };
        k.cutoff = k.auto_cutoff(12.0 * sigma)?;
        Ok(k)
    }

    pub fn exponential(dim: usize, mass: f64, scale: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("exponential mass", mass)?;
        check_positive("exponential scale", scale)?;
        let mut k = KernelSpec {
            family: KernelFamily::Exponential { mass, scale },
            dim,
            cutoff: f64::INFINITY,
        };
        k.cutoff = k.auto_cutoff(60.0 * scale)?;
        Ok(k)
    }

    /// Power-law kernel. `cutoff` may be `f64::INFINITY`; a finite cutoff is
    /// required before the kernel can be used in the simulator.
    pub fn power_law(dim: usize, amplitude: f64, exponent: f64, cutoff: f64) -> Result<Self> {
        check_dim(dim)?;
        check_positive("power-law amplitude", amplitude)?;
        if !(exponent.is_finite() && exponent > dim as f64) {
            return Err(CoreError::InvalidKernel(format!(
                "power-law exponent must exceed the dimension ({dim}), got {exponent}"
            )));
        }
        if !(cutoff > 0.0) {
            return Err(CoreError::InvalidKernel(format!(
                "power-law cutoff must be positive (possibly infinite), got {cutoff}"
            )));
        }
        Ok(KernelSpec {
            family: KernelFamily::PowerLaw {
                amplitude,
                exponent,
            },
            dim,
            cutoff,
        })
    }

    /// Replaces the cutoff with a larger one. Shrinking below the automatic
    /// cutoff is rejected: it would invalidate the analytic moments.
    pub fn with_cutoff(mut self, cutoff: f64) -> Result<Self> {
        if cutoff < self.cutoff {
            return Err(CoreError::InvalidKernel(format!(
                "cutoff {cutoff} is below the kernel's minimal cutoff {}",
                self.cutoff
            )));
        }
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, KernelFamily::Zero)
    }

    /// Radius of the set where the kernel is nonzero.
    pub fn support_radius(&self) -> f64 {
        match self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TopHat { radius, .. } => radius.min(self.cutoff),
            _ => self.cutoff,
        }
    }

    /// Kernel value at radius `r` (exactly zero beyond the cutoff).
    pub fn evaluate_radial(&self, r: f64) -> f64 {
        if r > self.cutoff {
            return 0.0;
        }
        match self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TopHat { height, radius } => {
                if r <= radius {
                    height
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian { mass, sigma } => {
                let norm_const =
                    mass / (2.0 * std::f64::consts::PI * sigma * sigma).powf(self.dim as f64 / 2.0);
                norm_const * (-0.5 * r * r / (sigma * sigma)).exp()
            }
            KernelFamily::Exponential { mass, scale } => {
                let gamma_d = match self.dim {
                    1 => 1.0,
                    2 => 1.0,
                    _ => 2.0,
                };
                let norm_const = mass
                    / (unit_sphere_surface(self.dim) * gamma_d * scale.powi(self.dim as i32));
                norm_const * (-r / scale).exp()
            }
            KernelFamily::PowerLaw {
                amplitude,
                exponent,
            } => amplitude * (1.0 + r).powf(-exponent),
        }
    }

    /// Kernel value at a displacement vector.
    #[inline]
    pub fn evaluate(&self, displacement: Point) -> f64 {
        self.evaluate_radial(norm(displacement))
    }

    /// Total mass `int k(x) dx`. Analytic for top-hat, Gaussian, and
    /// exponential kernels (the automatic cutoff keeps the truncation error
    /// below [`TAIL_FRACTION`] relative); quadrature for power-law kernels.
    pub fn l1_norm(&self) -> f64 {
        match self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TopHat { height, radius } => {
                height * ball_volume(self.dim, radius.min(self.cutoff))
            }
            KernelFamily::Gaussian { mass, .. } | KernelFamily::Exponential { mass, .. } => mass,
            KernelFamily::PowerLaw { .. } => self
                .l1_by_quadrature(1e-12)
                .expect("power-law mass quadrature converges"),
        }
    }

    /// Total mass by radial quadrature over the truncated support.
    pub fn l1_by_quadrature(&self, abs_tol: f64) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let surface = unit_sphere_surface(self.dim);
        let dim = self.dim as f64;
        let f = |r: f64| r.powf(dim - 1.0) * self.evaluate_radial(r);
        let r = if self.cutoff.is_finite() {
            integrate(f, 0.0, self.support_radius(), abs_tol)?
        } else {
            integrate_to_infinity(f, 0.0, abs_tol)?
        };
        Ok(surface * r.value)
    }

    /// Rescales the kernel's values by `factor` (support unchanged).
    pub fn scale_values(&self, factor: f64) -> Result<KernelSpec> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(CoreError::InvalidKernel(format!(
                "scale factor must be finite and positive, got {factor}"
            )));
        }
        let family = match self.family {
            KernelFamily::Zero => KernelFamily::Zero,
            KernelFamily::TopHat { height, radius } => KernelFamily::TopHat {
                height: height * factor,
                radius,
            },
            KernelFamily::Gaussian { mass, sigma } => KernelFamily::Gaussian {
                mass: mass * factor,
                sigma,
            },
            KernelFamily::Exponential { mass, scale } => KernelFamily::Exponential {
                mass: mass * factor,
                scale,
            },
            KernelFamily::PowerLaw {
                amplitude,
                exponent,
            } => KernelFamily::PowerLaw {
                amplitude: amplitude * factor,
                exponent,
            },
        };
        Ok(KernelSpec {
            family,
            dim: self.dim,
            cutoff: self.cutoff,
        })
    }

    /// Rescales so the total mass is exactly one.
    pub fn normalized(&self) -> Result<KernelSpec> {
        let mass = self.l1_norm();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(CoreError::InvalidKernel(
                "kernel with zero or nonfinite mass cannot be normalized".into(),
            ));
        }
        self.scale_values(1.0 / mass)
    }

    /// `int (1 - exp(-k(x))) dx`. Closed form for top-hat, quadrature
    /// otherwise. The flag marks the degenerate (identically zero) case.
    pub fn effective_volume(&self) -> Result<EffectiveVolume> {
        let value = match self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TopHat { height, radius } => {
                ball_volume(self.dim, radius.min(self.cutoff)) * (-(-height).exp() + 1.0)
            }
            _ => {
                let surface = unit_sphere_surface(self.dim);
                let dim = self.dim as f64;
                let f = |r: f64| {
                    let v = self.evaluate_radial(r);
                    r.powf(dim - 1.0) * (-(-v).exp() + 1.0)
                };
                let q = if self.cutoff.is_finite() {
                    integrate(f, 0.0, self.support_radius(), 1e-12)?
                } else {
                    integrate_to_infinity(f, 0.0, 1e-12)?
                };
                surface * q.value
            }
        };
        if !value.is_finite() {
            return Err(CoreError::InvalidKernel(
                "effective volume is not finite".into(),
            ));
        }
        Ok(EffectiveVolume {
            value,
            degenerate: value == 0.0,
        })
    }

    /// Smallest radius whose discarded tail mass is below
    /// `TAIL_FRACTION * l1_norm`, found by bisection on the tail integral.
    fn auto_cutoff(&self, hi_guess: f64) -> Result<f64> {
        let total = match self.family {
            KernelFamily::Gaussian { mass, .. } | KernelFamily::Exponential { mass, .. } => mass,
            _ => {
                return Err(CoreError::InvalidKernel(
                    "automatic cutoff only applies to gaussian and exponential kernels".into(),
                ))
            }
        };
        let target = TAIL_FRACTION * total;
        let dim = self.dim as f64;
        let surface = unit_sphere_surface(self.dim);
        let tail = |r0: f64| -> Result<f64> {
            let q = integrate_to_infinity(
                |r| r.powf(dim - 1.0) * self.evaluate_radial(r),
                r0,
                0.02 * target,
            )?;
            Ok(surface * q.value)
        };
        let mut lo = 0.0;
        let mut hi = hi_guess;
        if tail(hi)? > target {
            return Err(CoreError::InvalidKernel(
                "tail bisection bracket too small".into(),
            ));
        }
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if tail(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi * (1.0 + 1e-9))
    }
}

/// Which right-hand side a linear domination compares against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DominationWeight {
    /// `num(x) <= A * den(x)`
    Plain,
    /// `num(x) <= A * den(x) * exp(-den(x))`
    ExpDen,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DominationRoute {
    /// Numerator is the zero kernel; the constant is exactly zero.
    ZeroNumerator,
    /// Both kernels are top-hats; ratio is an exact closed form.
    ExactTopHat,
    /// Power-law pair; exact decay-rate comparison.
    ExactPowerLaw,
    /// Rigorous closed-form upper bound (may exceed the true supremum).
    ClosedFormBound,
    /// Refined grid scan of the ratio; see `margin`.
    Scan,
}

/// A finite domination constant, how it was obtained, and (for scanned
/// routes) the change between the last two refinement passes.
#[derive(Clone, Copy, Debug)]
pub struct Domination {
    pub constant: f64,
    pub margin: f64,
    pub route: DominationRoute,
}

fn structural(msg: String) -> CoreError {
    CoreError::StructuralFailure(msg)
}

/// Scans `num(r) / den(r)` on `[0, r_max]` with three refinement passes
/// around the maximizer. Returns `(sup, margin)`.
fn radial_ratio_scan(
    num: impl Fn(f64) -> f64,
    den: impl Fn(f64) -> f64,
    r_max: f64,
) -> Result<(f64, f64)> {
    let eval = |r: f64| -> Result<Option<f64>> {
        let n = num(r);
        if n == 0.0 {
            return Ok(None);
        }
        let d = den(r);
        if d <= 0.0 {
            return Err(structural(format!(
                "ratio numerator positive where denominator vanishes (radius {r})"
            )));
        }
        Ok(Some(n / d))
    };

    let mut lo = 0.0;
    let mut hi = r_max;
    let mut best = 0.0;
    let mut best_r = 0.0;
    let mut prev_best = f64::NAN;
    let mut margin = f64::INFINITY;
    for pass in 0..4 {
        let n_pts = if pass == 0 { 2048 } else { 256 };
        let step = (hi - lo) / n_pts as f64;
        for i in 0..=n_pts {
            let r = (lo + i as f64 * step).min(r_max);
            if let Some(v) = eval(r)? {
                if v > best {
                    best = v;
                    best_r = r;
                }
            }
        }
        if pass > 0 {
            margin = (best - prev_best).abs();
        }
        prev_best = best;
        lo = (best_r - step).max(0.0);
        hi = (best_r + step).min(r_max);
    }
    Ok((best, margin))
}

/// Best constant `A` with `num <= A * den` (or `A * den * exp(-den)`).
///
/// Fails structurally when the numerator's support is not contained in the
/// denominator's, or when no finite constant can be established.
pub fn linear_domination(
    num: &KernelSpec,
    den: &KernelSpec,
    weight: DominationWeight,
) -> Result<Domination> {
    if num.dim() != den.dim() {
        return Err(CoreError::InvalidArgument(
            "domination requires kernels of equal dimension".into(),
        ));
    }
    if num.is_zero() {
        return Ok(Domination {
            constant: 0.0,
            margin: 0.0,
            route: DominationRoute::ZeroNumerator,
        });
    }
    let r_num = num.support_radius();
    let r_den = den.support_radius();
    if r_num > r_den {
        return Err(structural(format!(
            "numerator support (radius {r_num}) exceeds denominator support (radius {r_den})"
        )));
    }

    match (num.family(), den.family(), weight) {
        (
            KernelFamily::TopHat { height: hn, .. },
            KernelFamily::TopHat { height: hd, .. },
            DominationWeight::Plain,
        ) => Ok(Domination {
            constant: hn / hd,
            margin: 0.0,
            route: DominationRoute::ExactTopHat,
        }),
        (
            KernelFamily::TopHat { height: hn, .. },
            KernelFamily::TopHat { height: hd, .. },
            DominationWeight::ExpDen,
        ) => Ok(Domination {
            constant: hn / (hd * (-hd).exp()),
            margin: 0.0,
            route: DominationRoute::ExactTopHat,
        }),
        (
            KernelFamily::PowerLaw {
                amplitude: an,
                exponent: en,
            },
            KernelFamily::PowerLaw {
                amplitude: ad,
                exponent: ed,
            },
            w,
        ) => {
            if en < ed {
                return Err(structural(format!(
                    "power-law numerator decays slower than denominator ({en} < {ed})"
                )));
            }
            match w {
                // Ratio (an/ad)(1+r)^(ed-en) is maximal at r = 0.
                DominationWeight::Plain => Ok(Domination {
                    constant: an / ad,
                    margin: 0.0,
                    route: DominationRoute::ExactPowerLaw,
                }),
                // exp(den(r)) <= exp(den(0)) gives a rigorous bound valid on
                // an unbounded support.
                DominationWeight::ExpDen => Ok(Domination {
                    constant: (an / ad) * ad.exp(),
                    margin: 0.0,
                    route: DominationRoute::ClosedFormBound,
                }),
            }
        }
        _ => {
            if !r_num.is_finite() {
                return Err(structural(
                    "no finite domination constant established for an unbounded numerator support"
                        .into(),
                ));
            }
            let den_fn = |r: f64| {
                let v = den.evaluate_radial(r);
                match weight {
                    DominationWeight::Plain => v,
                    DominationWeight::ExpDen => v * (-v).exp(),
                }
            };
            let (sup, margin) = radial_ratio_scan(|r| num.evaluate_radial(r), den_fn, r_num)?;
            Ok(Domination {
                constant: sup,
                margin,
                route: DominationRoute::Scan,
            })
        }
    }
}

/// Best constant `A2` with `a(u) * b(v) <= A2 * phi(u) * phi(u + v)` over all
/// displacement pairs, the pair bound used by the establishment-mechanism
/// condition.
pub fn pair_domination(a: &KernelSpec, b: &KernelSpec, phi: &KernelSpec) -> Result<Domination> {
    if a.dim() != phi.dim() || b.dim() != phi.dim() {
        return Err(CoreError::InvalidArgument(
            "pair domination requires kernels of equal dimension".into(),
        ));
    }
    if b.is_zero() || a.is_zero() {
        return Ok(Domination {
            constant: 0.0,
            margin: 0.0,
            route: DominationRoute::ZeroNumerator,
        });
    }
    let ra = a.support_radius();
    let rb = b.support_radius();
    let rphi = phi.support_radius();

    // The pair (u, v) ranges over supp a x supp b, and u + v reaches every
    // length up to ra + rb; phi must cover that reach.
    let reach_ok = if ra.is_finite() && rb.is_finite() {
        ra + rb <= rphi
    } else {
        rphi.is_infinite()
    };
    if ra > rphi || !reach_ok {
        return Err(structural(format!(
            "suppression support (radius {rphi}) does not cover dispersal reach (radius {ra} + {rb})"
        )));
    }

    match (a.family(), b.family(), phi.family()) {
        (
            KernelFamily::TopHat { height: ha, .. },
            KernelFamily::TopHat { height: hb, .. },
            KernelFamily::TopHat { height: hp, .. },
        ) => Ok(Domination {
            constant: ha * hb / (hp * hp),
            margin: 0.0,
            route: DominationRoute::ExactTopHat,
        }),
        (
            &KernelFamily::PowerLaw {
                amplitude: ea,
                exponent: da,
            },
            &KernelFamily::PowerLaw {
                amplitude: eb,
                exponent: db,
            },
            &KernelFamily::PowerLaw {
                amplitude: ep,
                exponent: dp,
            },
        ) => {
            // With delta = min(db, da / 2) >= dp both factors dominate:
            //   a(u)b(v) <= E1^2 (1+|u|)^(-delta) (1+|u+v|)^(-delta)
            //            <= (E1/Ep)^2 phi(u) phi(u+v),
            // using (1+|u+v|) <= (1+|u|)(1+|v|).
            let delta = db.min(da / 2.0);
            if delta < dp {
                return Err(structural(format!(
                    "power-law decay min({db}, {da}/2) = {delta} is slower than the suppression decay {dp}"
                )));
            }
            let e1 = ea.max(eb).max(ep);
            let e2 = e1 / ep;
            Ok(Domination {
                constant: e2 * e2,
                margin: 0.0,
                route: DominationRoute::ClosedFormBound,
            })
        }
        _ => {
            if !(ra.is_finite() && rb.is_finite()) {
                return Err(structural(
                    "no finite pair constant established for unbounded dispersal support".into(),
                ));
            }
            pair_ratio_scan(a, b, phi, ra, rb)
        }
    }
}

/// Grid scan of `a(ru) b(rv) / (phi(ru) phi(|u + v|))` over radii and the
/// angle between `u` and `v` (in d = 1 only the two sign alignments exist).
fn pair_ratio_scan(
    a: &KernelSpec,
    b: &KernelSpec,
    phi: &KernelSpec,
    ra: f64,
    rb: f64,
) -> Result<Domination> {
    let cos_values: Vec<f64> = if a.dim() == 1 {
        vec![-1.0, 1.0]
    } else {
        (0..=32).map(|i| -1.0 + i as f64 / 16.0).collect()
    };
    let eval = |ru: f64, rv: f64, c: f64| -> Result<Option<f64>> {
        let n = a.evaluate_radial(ru) * b.evaluate_radial(rv);
        if n == 0.0 {
            return Ok(None);
        }
        let w = (ru * ru + rv * rv + 2.0 * ru * rv * c).max(0.0).sqrt();
        let d = phi.evaluate_radial(ru) * phi.evaluate_radial(w);
        if d <= 0.0 {
            return Err(structural(format!(
                "pair ratio positive where suppression vanishes (|u| = {ru}, |u+v| = {w})"
            )));
        }
        Ok(Some(n / d))
    };

    let mut lo = (0.0, 0.0);
    let mut hi = (ra, rb);
    let mut best = 0.0;
    let mut best_at = (0.0, 0.0, 1.0);
    let mut prev_best = f64::NAN;
    let mut margin = f64::INFINITY;
    for pass in 0..3 {
        let n_pts = if pass == 0 { 96 } else { 48 };
        let (su, sv) = (
            (hi.0 - lo.0) / n_pts as f64,
            (hi.1 - lo.1) / n_pts as f64,
        );
        for i in 0..=n_pts {
            let ru = (lo.0 + i as f64 * su).min(ra);
            for j in 0..=n_pts {
                let rv = (lo.1 + j as f64 * sv).min(rb);
                for &c in &cos_values {
                    if let Some(v) = eval(ru, rv, c)? {
                        if v > best {
                            best = v;
                            best_at = (ru, rv, c);
                        }
                    }
                }
            }
        }
        if pass > 0 {
            margin = (best - prev_best).abs();
        }
        prev_best = best;
        lo = ((best_at.0 - su).max(0.0), (best_at.1 - sv).max(0.0));
        hi = ((best_at.0 + su).min(ra), (best_at.1 + sv).min(rb));
    }
    Ok(Domination {
        constant: best,
        margin,
        route: DominationRoute::Scan,
    })
}
