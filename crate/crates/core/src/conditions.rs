//! Sufficient-condition checks for well-posedness regimes.
//!
//! Each check reduces to a single strict inequality `lhs < rhs` between
//! combinations of kernel constants: the dispersal and enhancement masses,
//! the suppression mass and effective volume, and the domination constants
//! from [`crate::kernels`]. The report carries both sides, every
//! intermediate constant, and a verdict; ties within [`BOUNDARY_TOL`] are
//! flagged as boundary cases rather than silently resolved.
//!
//! When a required domination constant does not exist (for example the
//! dispersal kernel reaches beyond the suppression kernel's support) the
//! check fails structurally with an error instead of producing a verdict.

use std::f64::consts::E;

use crate::error::{CoreError, Result};
use crate::kernels::{linear_domination, pair_domination, DominationWeight};
use crate::model::{Mechanism, ModelParams};

/// Absolute tie tolerance separating a clean verdict from a boundary flag.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckId {
    /// Correlation-evolution bound for the establishment mechanism.
    EstablishmentWellPosed,
    /// Correlation-evolution bound for the fecundity mechanism.
    FecundityWellPosed,
    /// The same bound with the suppression mass in place of the effective
    /// volume, as required along the mean-field rescaling.
    VlasovScalingRegime,
    /// Contraction condition for the kinetic fixed-point construction.
    KineticFixedPoint,
}

impl CheckId {
    pub fn label(&self) -> &'static str {
        match self {
            CheckId::EstablishmentWellPosed => "establishment-well-posed",
            CheckId::FecundityWellPosed => "fecundity-well-posed",
            CheckId::VlasovScalingRegime => "vlasov-scaling-regime",
            CheckId::KineticFixedPoint => "kinetic-fixed-point",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// `|lhs - rhs| < BOUNDARY_TOL`: too close to call at floating precision.
    Boundary,
}

/// Outcome of one condition check.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    pub check: CheckId,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    /// Every constant entering the inequality, in a stable order.
    pub constants: Vec<(&'static str, f64)>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn satisfied(&self) -> bool {
        self.verdict == Verdict::Satisfied
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    }
}

fn verdict_for(lhs: f64, rhs: f64) -> Verdict {
    if (lhs - rhs).abs() < BOUNDARY_TOL {
        Verdict::Boundary
    } else if lhs < rhs {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

fn validate_big_c(big_c: f64) -> Result<()> {
    if !(big_c.is_finite() && big_c > 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "correlation weight constant must be finite and exceed one, got {big_c}"
        )));
    }
    Ok(())
}

fn reject_degenerate_suppression(params: &ModelParams) -> Result<()> {
    if params.suppression_kernel().is_zero() {
        return Err(CoreError::StructuralFailure(
            "suppression kernel is identically zero; no regulation to check".into(),
        ));
    }
    Ok(())
}

struct SharedConstants {
    c_phi: f64,
    phi_mass: f64,
    b_mass: f64,
    kappa: f64,
    m: f64,
}

fn shared_constants(params: &ModelParams) -> Result<SharedConstants> {
    let phi = params.suppression_kernel();
    let vol = phi.effective_volume()?;
    Ok(SharedConstants {
        c_phi: vol.value,
        phi_mass: phi.l1_norm(),
        b_mass: params.enhancement_kernel().l1_norm(),
        kappa: params.fertility(),
        m: params.mortality(),
    })
}

/// Left side of the establishment bound plus its domination constants.
fn establishment_lhs(params: &ModelParams, big_c: f64, sc: &SharedConstants) -> Result<(f64, f64, f64)> {
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let a1 = linear_domination(a, phi, DominationWeight::Plain)?.constant;
    let a2 = pair_domination(a, b, phi)?.constant;
    let lhs = a1 * sc.kappa / (E * big_c)
        + 4.0 * a2 / (E * E * big_c)
        + a1 * sc.b_mass / E
        + sc.kappa
        + a2 * sc.phi_mass / E
        + big_c * sc.b_mass;
    Ok((lhs, a1, a2))
}

/// Left side of the fecundity bound plus its domination constants.
fn fecundity_lhs(params: &ModelParams, big_c: f64, sc: &SharedConstants) -> Result<(f64, f64, f64)> {
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let a1 = linear_domination(a, phi, DominationWeight::ExpDen)?.constant;
    let a2 = linear_domination(b, phi, DominationWeight::Plain)?.constant;
    let lhs = sc.kappa
        + a2 / E
        + big_c * sc.b_mass
        + (sc.kappa / big_c + sc.b_mass) * a1 / E
        + 4.0 * a1 * a2 * big_c / (E * E);
    Ok((lhs, a1, a2))
}

fn build_report(
    check: CheckId,
    params: &ModelParams,
    big_c: f64,
    suppression_scale: f64,
    scale_key: &'static str,
) -> Result<ConditionReport> {
    validate_big_c(big_c)?;
    reject_degenerate_suppression(params)?;
    let sc = shared_constants(params)?;
    let mechanism = params.mechanism();
    let (lhs, a1, a2) = match mechanism {
        Mechanism::Establishment => establishment_lhs(params, big_c, &sc)?,
        Mechanism::Fecundity => fecundity_lhs(params, big_c, &sc)?,
    };
    let rhs = 0.5 * sc.m * (-suppression_scale * big_c).exp();

    // Proof-level growth constant and the induced bound ratio. For the
    // fecundity mechanism the verdict inequality groups its cross term with
    // a factor big_c instead of 1/big_c, so it is slightly stronger than
    // the ratio condition; both are reported.
    let weight = (sc.c_phi * big_c).exp();
    let d_bound = match mechanism {
        Mechanism::Establishment => weight * big_c * lhs,
        Mechanism::Fecundity => {
            weight
                * (big_c * sc.kappa
                    + big_c * a2 / E
                    + big_c * big_c * sc.b_mass
                    + (sc.kappa + big_c * sc.b_mass) * a1 / E
                    + 4.0 * a1 * a2 / (E * E))
        }
    };
    let a_ratio = d_bound / sc.m;

    let mut notes = Vec::new();
    if params.enhancement_kernel().is_zero() {
        notes.push(
            "zero enhancement kernel: the bound takes its reduced crowding-free form".to_string(),
        );
    }

    Ok(ConditionReport {
        check,
        lhs,
        rhs,
        verdict: verdict_for(lhs, rhs),
        constants: vec![
            ("mortality", sc.m),
            ("fertility", sc.kappa),
            ("a1", a1),
            ("a2", a2),
            ("b_mass", sc.b_mass),
            ("phi_mass", sc.phi_mass),
            ("c_phi", sc.c_phi),
            ("big_c", big_c),
            (scale_key, suppression_scale),
            ("d_bound", d_bound),
            ("a_ratio", a_ratio),
        ],
        notes,
    })
}

/// Checks the correlation-evolution bound for the model's mechanism with
/// weight constant `big_c > 1`.
pub fn check_wellposedness(params: &ModelParams, big_c: f64) -> Result<ConditionReport> {
    reject_degenerate_suppression(params)?;
    let sc = shared_constants(params)?;
    let check = match params.mechanism() {
        Mechanism::Establishment => CheckId::EstablishmentWellPosed,
        Mechanism::Fecundity => CheckId::FecundityWellPosed,
    };
    build_report(check, params, big_c, sc.c_phi, "suppression_volume")
}

/// Same inequality with the full suppression mass in the exponential weight,
/// the stricter regime required along the mean-field rescaling (the scaled
/// effective volume increases towards the mass as the scale shrinks).
pub fn check_vlasov_regime(params: &ModelParams, big_c: f64) -> Result<ConditionReport> {
    reject_degenerate_suppression(params)?;
    let sc = shared_constants(params)?;
    let mut report = build_report(
        CheckId::VlasovScalingRegime,
        params,
        big_c,
        sc.phi_mass,
        "suppression_mass",
    )?;
    let rhs_plain = 0.5 * sc.m * (-sc.c_phi * big_c).exp();
    debug_assert!(report.rhs <= rhs_plain * (1.0 + 1e-15));
    report.constants.push(("rhs_unscaled_regime", rhs_plain));
    report.notes.push(format!(
        "threshold {:.6e} is at most the unscaled-regime threshold {rhs_plain:.6e}",
        report.rhs
    ));
    Ok(report)
}

/// Contraction condition for the kinetic fixed-point iteration on the ball
/// of radius `ball_radius` in the uniform norm.
///
/// Reports the contraction factor `q` (satisfied requires `q < 1`) and the
/// ball-invariance margin: the iteration maps the ball into itself when
/// `(A/e) * (fertility / ball_radius + enhancement mass) <= mortality`,
/// with `A` dominating both the dispersal and enhancement kernels by the
/// suppression kernel. The estimate is derived for the establishment form
/// of the kinetic equation; a note marks its heuristic use otherwise.
pub fn check_kinetic_fixed_point(params: &ModelParams, ball_radius: f64) -> Result<ConditionReport> {
    if !(ball_radius.is_finite() && ball_radius > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "ball radius must be finite and positive, got {ball_radius}"
        )));
    }
    reject_degenerate_suppression(params)?;
    let sc = shared_constants(params)?;
    let a = params.dispersal_kernel();
    let b = params.enhancement_kernel();
    let phi = params.suppression_kernel();
    let a_disp = linear_domination(a, phi, DominationWeight::Plain)?.constant;
    let a_const = if b.is_zero() {
        a_disp
    } else {
        a_disp.max(linear_domination(b, phi, DominationWeight::Plain)?.constant)
    };

    let damped = a_const * sc.phi_mass / E;
    let lhs = sc.kappa * (1.0 + damped) + ball_radius * sc.b_mass * (2.0 + damped);
    let rhs = sc.m;
    let q = lhs / rhs;
    let ball_lhs = (a_const / E) * (sc.kappa / ball_radius + sc.b_mass);
    let ball_margin = sc.m - ball_lhs;

    let mut notes = Vec::new();
    if ball_margin < 0.0 {
        notes.push(format!(
            "ball invariance fails: ({a_const:.6} / e) * (fertility / radius + enhancement mass) = {ball_lhs:.6} exceeds mortality {:.6}",
            sc.m
        ));
    }
    if params.mechanism() == Mechanism::Fecundity {
        notes.push(
            "contraction estimate derived for the establishment equation; heuristic here"
                .to_string(),
        );
    }

    Ok(ConditionReport {
        check: CheckId::KineticFixedPoint,
        lhs,
        rhs,
        verdict: verdict_for(lhs, rhs),
        constants: vec![
            ("mortality", sc.m),
            ("fertility", sc.kappa),
            ("a_const", a_const),
            ("b_mass", sc.b_mass),
            ("phi_mass", sc.phi_mass),
            ("ball_radius", ball_radius),
            ("q", q),
            ("ball_lhs", ball_lhs),
            ("ball_margin", ball_margin),
        ],
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::model::Dispersal;

    fn est_params(kappa: f64, m: f64) -> ModelParams {
        let a = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let phi = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        ModelParams::independent(m, kappa, a, phi, Mechanism::Establishment).unwrap()
    }

    #[test]
    fn establishment_reduced_form_hand_value() {
        let params = est_params(0.3, 3.0);
        let big_c = 1.0 + 1e-6;
        let r = check_wellposedness(&params, big_c).unwrap();
        let a1 = 1.0;
        let lhs = a1 * 0.3 / (E * big_c) + 0.3;
        let c_phi = 1.0 - (-1.0f64).exp();
        let rhs = 1.5 * (-c_phi * big_c).exp();
        assert!((r.lhs - lhs).abs() < 1e-14, "lhs {} vs {lhs}", r.lhs);
        assert!((r.rhs - rhs).abs() < 1e-14);
        assert_eq!(r.verdict, Verdict::Satisfied);
        assert!(r.notes.iter().any(|n| n.contains("reduced")));
    }

    #[test]
    fn verdict_flips_with_mortality_and_boundary_is_detected() {
        let big_c = 1.5;
        let low = check_wellposedness(&est_params(0.5, 0.2), big_c).unwrap();
        assert_eq!(low.verdict, Verdict::Violated);
        let high = check_wellposedness(&est_params(0.5, 50.0), big_c).unwrap();
        assert_eq!(high.verdict, Verdict::Satisfied);

        // Mortality placed exactly on the threshold.
        let lhs = low.lhs;
        let c_phi = low.constant("c_phi").unwrap();
        let m_star = 2.0 * lhs * (c_phi * big_c).exp();
        let boundary = check_wellposedness(&est_params(0.5, m_star), big_c).unwrap();
        assert_eq!(boundary.verdict, Verdict::Boundary);
    }

    #[test]
    fn fecundity_bound_hand_value() {
        let a = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let b = KernelSpec::top_hat(1, 0.2, 0.4).unwrap();
        let phi = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let params = ModelParams::new(
            5.0,
            0.4,
            a,
            b,
            phi,
            Mechanism::Fecundity,
            Dispersal::DensityDependent,
        )
        .unwrap();
        let big_c = 1.2;
        let r = check_wellposedness(&params, big_c).unwrap();
        let a1 = 1.0 / (1.0 * (-1.0f64).exp());
        let a2 = 0.2;
        let b_mass = 0.2 * 0.8;
        let lhs = 0.4
            + a2 / E
            + big_c * b_mass
            + (0.4 / big_c + b_mass) * a1 / E
            + 4.0 * a1 * a2 * big_c / (E * E);
        assert!((r.lhs - lhs).abs() < 1e-13, "lhs {} vs {lhs}", r.lhs);
        assert_eq!(r.check, CheckId::FecundityWellPosed);

        // The reported growth constant implies a slightly weaker inequality.
        let d = r.constant("d_bound").unwrap();
        assert!(2.0 * d / big_c <= 2.0 * lhs * (r.constant("c_phi").unwrap() * big_c).exp() + 1e-12);
    }

    #[test]
    fn vlasov_regime_is_stricter() {
        let params = est_params(0.3, 3.0);
        let plain = check_wellposedness(&params, 1.1).unwrap();
        let scaled = check_vlasov_regime(&params, 1.1).unwrap();
        assert!(scaled.rhs <= plain.rhs);
        assert!((scaled.lhs - plain.lhs).abs() < 1e-14);
        assert!(scaled.constant("rhs_unscaled_regime").is_some());
    }

    #[test]
    fn structural_failure_when_dispersal_outreaches_suppression() {
        let a = KernelSpec::top_hat(1, 0.625, 0.8).unwrap();
        let phi = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let params =
            ModelParams::independent(1.0, 1.0, a, phi, Mechanism::Establishment).unwrap();
        assert!(matches!(
            check_wellposedness(&params, 1.5),
            Err(CoreError::StructuralFailure(_))
        ));
    }

    #[test]
    fn degenerate_suppression_is_structural() {
        let a = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let params = ModelParams::independent(
            1.0,
            1.0,
            a,
            KernelSpec::zero(1),
            Mechanism::Establishment,
        )
        .unwrap();
        assert!(matches!(
            check_wellposedness(&params, 1.5),
            Err(CoreError::StructuralFailure(_))
        ));
    }

    #[test]
    fn kinetic_fixed_point_contraction_factor() {
        let a = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let b = KernelSpec::top_hat(1, 0.1, 0.5).unwrap();
        let phi = KernelSpec::top_hat(1, 1.0, 0.5).unwrap();
        let params = ModelParams::new(
            2.5,
            1.0,
            a,
            b,
            phi,
            Mechanism::Establishment,
            Dispersal::DensityDependent,
        )
        .unwrap();
        let r = check_kinetic_fixed_point(&params, 1.0).unwrap();
        let damped = 1.0 * 1.0 / E;
        let lhs = 1.0 * (1.0 + damped) + 1.0 * 0.1 * (2.0 + damped);
        assert!((r.lhs - lhs).abs() < 1e-13);
        let q = r.constant("q").unwrap();
        assert!((q - lhs / 2.5).abs() < 1e-13);
        assert_eq!(r.verdict, Verdict::Satisfied);
        assert!(r.constant("ball_margin").unwrap() > 0.0);
    }
}
