//! TOML run configuration: one file describes a model, a domain, and the
//! command-specific sections. Unknown keys are rejected so typos fail fast,
//! and every `--set key=value` override lands in the raw document before it
//! is validated, so overrides obey the same rules as the file itself.

use std::path::Path;

use serde::Deserialize;

use ecokin_core::geometry::{point_from_slice, Point, Space};
use ecokin_core::kernels::KernelSpec;
use ecokin_core::kinetics::{DensityField, Grid, Scheme};
use ecokin_core::model::{Dispersal, Mechanism, ModelParams};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    pub domain: Option<DomainSection>,
    pub ibm: Option<IbmSection>,
    pub kinetics: Option<KineticsSection>,
    pub checks: Option<ChecksSection>,
    pub limit: Option<LimitSection>,
    pub verify: Option<VerifySection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mortality: f64,
    pub fertility: f64,
    /// "establishment" or "fecundity".
    pub mechanism: String,
    /// "independent" or "density-dependent".
    #[serde(default = "default_dispersal")]
    pub dispersal: String,
    pub dispersal_kernel: KernelSection,
    /// Defaults to no enhancement.
    pub enhancement_kernel: Option<KernelSection>,
    pub suppression_kernel: KernelSection,
}

fn default_dispersal() -> String {
    "independent".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// "zero", "top-hat", "gaussian", "exponential", or "power-law".
    pub family: String,
    pub height: Option<f64>,
    pub radius: Option<f64>,
    pub mass: Option<f64>,
    pub sigma: Option<f64>,
    pub scale: Option<f64>,
    pub amplitude: Option<f64>,
    pub exponent: Option<f64>,
    pub cutoff: Option<f64>,
}

impl KernelSection {
    pub fn build(&self, dim: usize, where_: &str) -> Result<KernelSpec, CliError> {
        let need = |opt: Option<f64>, name: &str| {
            opt.ok_or_else(|| {
                CliError::Config(format!(
                    "{where_}: family \"{}\" needs `{name}`",
                    self.family
                ))
            })
        };
        let spec = match self.family.as_str() {
            "zero" => KernelSpec::zero(dim),
            "top-hat" => KernelSpec::top_hat(dim, need(self.height, "height")?, need(self.radius, "radius")?)
                .map_err(|e| CliError::Config(format!("{where_}: {e}")))?,
            "gaussian" => KernelSpec::gaussian(dim, need(self.mass, "mass")?, need(self.sigma, "sigma")?)
                .map_err(|e| CliError::Config(format!("{where_}: {e}")))?,
            "exponential" => {
                KernelSpec::exponential(dim, need(self.mass, "mass")?, need(self.scale, "scale")?)
                    .map_err(|e| CliError::Config(format!("{where_}: {e}")))?
            }
            "power-law" => KernelSpec::power_law(
                dim,
                need(self.amplitude, "amplitude")?,
                need(self.exponent, "exponent")?,
                need(self.cutoff, "cutoff")?,
            )
            .map_err(|e| CliError::Config(format!("{where_}: {e}")))?,
            other => {
                return Err(CliError::Config(format!(
                    "{where_}: unknown kernel family \"{other}\" \
                     (expected zero, top-hat, gaussian, exponential, or power-law)"
                )))
            }
        };
        match self.cutoff {
            Some(c) if self.family != "power-law" => spec
                .with_cutoff(c)
                .map_err(|e| CliError::Config(format!("{where_}: {e}"))),
            _ => Ok(spec),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    pub length: f64,
    #[serde(default = "default_grid_cells")]
    pub grid_cells: usize,
}

fn default_grid_cells() -> usize {
    128
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbmSection {
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub t_end: f64,
    pub sample_interval: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub initial: IbmInitial,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Event cap per replica; zero disables the cap.
    #[serde(default)]
    pub max_events: u64,
    #[serde(default = "default_audit_interval")]
    pub audit_interval: u64,
}

fn default_replicas() -> usize {
    1
}

fn default_seed() -> u64 {
    1
}

fn default_audit_interval() -> u64 {
    100_000
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IbmInitial {
    /// Poisson number of points at this intensity, uniform positions.
    Poisson { density: f64 },
    /// Exactly this many points, uniform positions.
    Fixed { count: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSection {
    /// "rk4" or "exponential-euler".
    #[serde(default = "default_scheme")]
    pub scheme: String,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub initial: InitialDensity,
    /// Also run the fixed-point iteration and report the cross difference.
    #[serde(default)]
    pub picard: bool,
    #[serde(default = "default_picard_tolerance")]
    pub picard_tolerance: f64,
    #[serde(default = "default_picard_iterations")]
    pub picard_max_iterations: usize,
    pub picard_ball_radius: Option<f64>,
    /// Solve under both mechanisms and report the gap between them.
    #[serde(default)]
    pub compare_mechanisms: bool,
}

fn default_scheme() -> String {
    "rk4".into()
}

fn default_record_every() -> usize {
    1
}

fn default_picard_tolerance() -> f64 {
    1e-8
}

fn default_picard_iterations() -> usize {
    40
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensity {
    Constant {
        density: f64,
    },
    GaussianBump {
        baseline: f64,
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    TwoBump {
        baseline: f64,
        amplitude: f64,
        width: f64,
        centers: Vec<Vec<f64>>,
    },
    /// One density value per grid cell, row-major, `#` comments allowed.
    FromFile {
        path: String,
    },
}

impl InitialDensity {
    pub fn build(&self, grid: Grid) -> Result<DensityField, CliError> {
        let bump_field = |baseline: f64, amplitude: f64, width: f64, centers: &[Vec<f64>]| {
            if !(width > 0.0) {
                return Err(CliError::Config(
                    "kinetics.initial: bump width must be positive".into(),
                ));
            }
            let mut points: Vec<Point> = Vec::new();
            for c in centers {
                if c.len() != grid.dim() {
                    return Err(CliError::Config(format!(
                        "kinetics.initial: bump center {c:?} does not match dimension {}",
                        grid.dim()
                    )));
                }
                points.push(point_from_slice(c));
            }
            let space = Space::torus(grid.length())
                .map_err(|e| CliError::Config(format!("domain: {e}")))?;
            let dim = grid.dim();
            Ok(DensityField::from_fn(grid, move |x| {
                let mut v = baseline;
                for c in &points {
                    let d = space.distance(x, *c, dim);
                    v += amplitude * (-d * d / (2.0 * width * width)).exp();
                }
                v
            }))
        };
        match self {
            InitialDensity::Constant { density } => {
                if !(density.is_finite() && *density >= 0.0) {
                    return Err(CliError::Config(format!(
                        "kinetics.initial: constant density must be nonnegative, got {density}"
                    )));
                }
                Ok(DensityField::constant(grid, *density))
            }
            InitialDensity::GaussianBump {
                baseline,
                amplitude,
                width,
                center,
            } => bump_field(*baseline, *amplitude, *width, std::slice::from_ref(center)),
            InitialDensity::TwoBump {
                baseline,
                amplitude,
                width,
                centers,
            } => {
                if centers.len() != 2 {
                    return Err(CliError::Config(format!(
                        "kinetics.initial: two-bump needs exactly 2 centers, got {}",
                        centers.len()
                    )));
                }
                bump_field(*baseline, *amplitude, *width, centers)
            }
            InitialDensity::FromFile { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("kinetics.initial: cannot read {path}: {e}"))
                })?;
                let mut values = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let v: f64 = line.parse().map_err(|_| {
                        CliError::Config(format!(
                            "kinetics.initial: {path}:{}: not a number: {line:?}",
                            lineno + 1
                        ))
                    })?;
                    values.push(v);
                }
                DensityField::from_values(grid, values)
                    .map_err(|e| CliError::Config(format!("kinetics.initial: {e}")))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    /// Semigroup constant C > 1 entering the mortality thresholds.
    #[serde(default = "default_big_c")]
    pub big_c: f64,
    /// Ball scale: the fixed-point ball radius defaults to `alpha * big_c`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub ball_radius: Option<f64>,
    /// Subset of "well-posed", "vlasov", "fixed-point"; defaults to all.
    pub which: Option<Vec<String>>,
}

fn default_big_c() -> f64 {
    2.0
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for ChecksSection {
    fn default() -> Self {
        ChecksSection {
            big_c: default_big_c(),
            alpha: default_alpha(),
            ball_radius: None,
            which: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSection {
    /// Scaling strengths, strictly decreasing, in (0, 1].
    pub epsilons: Vec<f64>,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub initial_density: f64,
    /// Histogram bins per dimension.
    pub bins: usize,
    /// Kinetic grid for the reference; defaults to domain.grid_cells.
    pub grid_cells: Option<usize>,
    pub dt: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub max_events: u64,
}

fn default_bootstrap() -> usize {
    200
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub seed: Option<u64>,
    pub expansion_instances: Option<usize>,
    pub transform_instances: Option<usize>,
    pub mc_samples: Option<usize>,
    /// Test hook: offset added to the closed-form expansion values; the
    /// suite must fail when this is nonzero.
    pub corrupt_expansion: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<String>,
}

impl RunConfig {
    pub fn model_section(&self) -> Result<&ModelSection, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [model] section".into()))
    }

    pub fn domain_section(&self) -> Result<&DomainSection, CliError> {
        self.domain
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [domain] section".into()))
    }

    /// Model parameters for the configured dimension; the dispersal kernel is
    /// normalized to unit mass here so configs may state any positive shape.
    pub fn build_params(&self) -> Result<ModelParams, CliError> {
        let model = self.model_section()?;
        let domain = self.domain_section()?;
        if domain.dim == 0 || domain.dim > 2 {
            return Err(CliError::Config(format!(
                "domain.dim must be 1 or 2, got {}",
                domain.dim
            )));
        }
        let mechanism = match model.mechanism.as_str() {
            "establishment" => Mechanism::Establishment,
            "fecundity" => Mechanism::Fecundity,
            other => {
                return Err(CliError::Config(format!(
                    "model.mechanism: expected \"establishment\" or \"fecundity\", got \"{other}\""
                )))
            }
        };
        let dispersal = match model.dispersal.as_str() {
            "independent" => Dispersal::Independent,
            "density-dependent" => Dispersal::DensityDependent,
            other => {
                return Err(CliError::Config(format!(
                    "model.dispersal: expected \"independent\" or \"density-dependent\", got \"{other}\""
                )))
            }
        };
        let dispersal_kernel = model
            .dispersal_kernel
            .build(domain.dim, "model.dispersal_kernel")?;
        let dispersal_kernel = if dispersal_kernel.is_zero() {
            dispersal_kernel
        } else {
            dispersal_kernel
                .normalized()
                .map_err(|e| CliError::Config(format!("model.dispersal_kernel: {e}")))?
        };
        let enhancement_kernel = match &model.enhancement_kernel {
            Some(k) => k.build(domain.dim, "model.enhancement_kernel")?,
            None => KernelSpec::zero(domain.dim),
        };
        let suppression_kernel = model
            .suppression_kernel
            .build(domain.dim, "model.suppression_kernel")?;
        ModelParams::new(
            model.mortality,
            model.fertility,
            dispersal_kernel,
            enhancement_kernel,
            suppression_kernel,
            mechanism,
            dispersal,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        let kin = self
            .kinetics
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [kinetics] section".into()))?;
        match kin.scheme.as_str() {
            "rk4" => Ok(Scheme::RungeKutta4),
            "exponential-euler" => Ok(Scheme::ExponentialEuler),
            other => Err(CliError::Config(format!(
                "kinetics.scheme: expected \"rk4\" or \"exponential-euler\", got \"{other}\""
            ))),
        }
    }
}

/// Parse the file, apply `--set` overrides into the raw document, then
/// validate. Returns the typed config plus the canonical serialized text the
/// provenance hash is computed from.
pub fn load_config(path: &Path, sets: &[String]) -> Result<(RunConfig, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: toml::Value = text
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for set in sets {
        apply_override(&mut value, set)?;
    }
    let canonical = toml::to_string(&value)
        .map_err(|e| CliError::Config(format!("cannot reserialize config: {e}")))?;
    let config: RunConfig = value
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((config, canonical))
}

/// `key.path=value`; the value is parsed as TOML, falling back to a string
/// so `--set model.mechanism=fecundity` works unquoted.
fn apply_override(root: &mut toml::Value, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set needs KEY=VALUE, got {set:?}")))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(table) => table["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set key {key:?} has an empty segment")));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Config(format!("--set {key}: {part} is not a table"))
        })?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("--set {key}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
