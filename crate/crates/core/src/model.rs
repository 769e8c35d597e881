//! Model parameters: mortality, fertility, kernels, and the regulation
//! mechanism.

use crate::error::{CoreError, Result};
use crate::kernels::KernelSpec;

/// Which side of a birth the suppression acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// The newborn's survival is damped by the energy at its landing site.
    Establishment,
    /// The parent's birth activity is damped by the energy at the parent.
    Fecundity,
}

impl Mechanism {
    pub fn label(&self) -> &'static str {
        match self {
            Mechanism::Establishment => "establishment",
            Mechanism::Fecundity => "fecundity",
        }
    }
}

/// Offspring placement law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dispersal {
    /// Each parent emits at rate `fertility`, displacement drawn from the
    /// dispersal kernel.
    Independent,
    /// The per-parent rate is enhanced by crowding:
    /// `fertility + sum b+(parent - neighbor)`.
    DensityDependent,
}

/// Complete parameter set of a spatial birth-death model.
///
/// Invariants enforced at construction: mortality strictly positive,
/// fertility nonnegative, all kernels share one dimension, the dispersal
/// kernel has unit mass, and the enhancement kernel is zero exactly when
/// dispersal is independent.
#[derive(Clone, Debug)]
pub struct ModelParams {
    mortality: f64,
    fertility: f64,
    dispersal_kernel: KernelSpec,
    enhancement_kernel: KernelSpec,
    suppression_kernel: KernelSpec,
    mechanism: Mechanism,
    dispersal: Dispersal,
}

impl ModelParams {
    pub fn new(
        mortality: f64,
        fertility: f64,
        dispersal_kernel: KernelSpec,
        enhancement_kernel: KernelSpec,
        suppression_kernel: KernelSpec,
        mechanism: Mechanism,
        dispersal: Dispersal,
    ) -> Result<Self> {
        if !(mortality.is_finite() && mortality > 0.0) {
            return Err(CoreError::InvalidModel(format!(
                "mortality must be strictly positive, got {mortality}"
            )));
        }
        if !(fertility.is_finite() && fertility >= 0.0) {
            return Err(CoreError::InvalidModel(format!(
                "fertility must be finite and nonnegative, got {fertility}"
            )));
        }
        let dim = dispersal_kernel.dim();
        if enhancement_kernel.dim() != dim || suppression_kernel.dim() != dim {
            return Err(CoreError::InvalidModel(
                "all kernels must share one dimension".into(),
            ));
        }
        let mass = dispersal_kernel.l1_norm();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidModel(format!(
                "dispersal kernel must have unit mass, got {mass}"
            )));
        }
        match dispersal {
            Dispersal::Independent if !enhancement_kernel.is_zero() => {
                return Err(CoreError::InvalidModel(
                    "independent dispersal requires a zero enhancement kernel".into(),
                ));
            }
            Dispersal::DensityDependent if enhancement_kernel.is_zero() => {
                return Err(CoreError::InvalidModel(
                    "density-dependent dispersal requires a nonzero enhancement kernel".into(),
                ));
            }
            _ => {}
        }
        Ok(ModelParams {
            mortality,
            fertility,
            dispersal_kernel,
            enhancement_kernel,
            suppression_kernel,
            mechanism,
            dispersal,
        })
    }

    /// Convenience constructor for crowding-independent dispersal.
    pub fn independent(
        mortality: f64,
        fertility: f64,
        dispersal_kernel: KernelSpec,
        suppression_kernel: KernelSpec,
        mechanism: Mechanism,
    ) -> Result<Self> {
        let dim = dispersal_kernel.dim();
        ModelParams::new(
            mortality,
            fertility,
            dispersal_kernel,
            KernelSpec::zero(dim),
            suppression_kernel,
            mechanism,
            Dispersal::Independent,
        )
    }

    pub fn mortality(&self) -> f64 {
        self.mortality
    }

    pub fn fertility(&self) -> f64 {
        self.fertility
    }

    pub fn dispersal_kernel(&self) -> &KernelSpec {
        &self.dispersal_kernel
    }

    pub fn enhancement_kernel(&self) -> &KernelSpec {
        &self.enhancement_kernel
    }

    pub fn suppression_kernel(&self) -> &KernelSpec {
        &self.suppression_kernel
    }

    pub fn mechanism(&self) -> Mechanism {
        self.mechanism
    }

    pub fn dispersal(&self) -> Dispersal {
        self.dispersal
    }

    pub fn dim(&self) -> usize {
        self.dispersal_kernel.dim()
    }

    /// Largest kernel cutoff; governs neighbor-search cell size.
    pub fn max_cutoff(&self) -> f64 {
        self.dispersal_kernel
            .cutoff()
            .max(self.enhancement_kernel.cutoff())
            .max(self.suppression_kernel.cutoff())
    }

    /// Copy with a different mechanism, all rates unchanged.
    pub fn with_mechanism(&self, mechanism: Mechanism) -> ModelParams {
        let mut p = self.clone();
        p.mechanism = mechanism;
        p
    }
}

/// Model parameters together with the mesoscopic scale parameter.
///
/// At scale `epsilon` the interactions are weakened to `eps * a+`,
/// `eps * b+`, `eps * phi` while densities grow like `1 / eps`; `epsilon = 1`
/// is the unscaled model.
#[derive(Clone, Debug)]
pub struct RatePackage<'a> {
    pub params: &'a ModelParams,
    pub epsilon: f64,
}

impl<'a> RatePackage<'a> {
    pub fn new(params: &'a ModelParams, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(RatePackage { params, epsilon })
    }

    pub fn unscaled(params: &'a ModelParams) -> Self {
        RatePackage {
            params,
            epsilon: 1.0,
        }
    }
}
