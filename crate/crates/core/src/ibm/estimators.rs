//! Spatial statistics over replica snapshots: binned density and the pair
//! correlation function.

use crate::error::{CoreError, Result};
use crate::geometry::{Point, Space};

/// Replica-averaged density on a uniform bin grid over `[0, length)^dim`.
#[derive(Clone, Debug)]
pub struct BinnedField {
    pub dim: usize,
    pub bins_per_dim: usize,
    pub length: f64,
    /// Mean density per bin, row-major in two dimensions.
    pub mean: Vec<f64>,
    /// Standard error of the mean over replicas (zero with one replica).
    pub stderr: Vec<f64>,
}

/// Histogram-estimate the density from one position snapshot per replica.
///
/// `scale` multiplies every count before normalization; pass the rescaling
/// factor when comparing a blown-up population against a limiting density,
/// and 1 otherwise.
pub fn density_histogram(
    replicas: &[&[Point]],
    dim: usize,
    length: f64,
    bins_per_dim: usize,
    scale: f64,
) -> Result<BinnedField> {
    if !(dim == 1 || dim == 2) {
        return Err(CoreError::InvalidArgument(format!(
            "density estimation supports dimensions 1 and 2, got {dim}"
        )));
    }
    if bins_per_dim == 0 {
        return Err(CoreError::InvalidArgument(
            "at least one bin per dimension is required".into(),
        ));
    }
    if replicas.is_empty() {
        return Err(CoreError::InvalidArgument(
            "density estimation needs at least one replica".into(),
        ));
    }
    let bins = bins_per_dim.pow(dim as u32);
    let cell_volume = (length / bins_per_dim as f64).powi(dim as i32);
    let r = replicas.len();

    let mut mean = vec![0.0; bins];
    let mut second = vec![0.0; bins];
    let mut counts = vec![0.0; bins];
    for snapshot in replicas {
        for c in counts.iter_mut() {
            *c = 0.0;
        }
        for p in snapshot.iter() {
            let mut idx = 0usize;
            for &coord in p.iter().take(dim) {
                let mut i = (coord / length * bins_per_dim as f64) as usize;
                if i >= bins_per_dim {
                    i = bins_per_dim - 1;
                }
                idx = idx * bins_per_dim + i;
            }
            counts[idx] += 1.0;
        }
        for (i, c) in counts.iter().enumerate() {
            let density = scale * c / cell_volume;
            mean[i] += density;
            second[i] += density * density;
        }
    }
    for i in 0..bins {
        mean[i] /= r as f64;
        second[i] /= r as f64;
    }
    let stderr = if r > 1 {
        (0..bins)
            .map(|i| {
                let var = ((second[i] - mean[i] * mean[i]) * r as f64 / (r - 1) as f64).max(0.0);
                (var / r as f64).sqrt()
            })
            .collect()
    } else {
        vec![0.0; bins]
    };

    Ok(BinnedField {
        dim,
        bins_per_dim,
        length,
        mean,
        stderr,
    })
}

/// Replica-averaged pair correlation over distance shells.
#[derive(Clone, Debug)]
pub struct PairCorrelation {
    pub shell_lower: Vec<f64>,
    pub shell_upper: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Replicas with at least two individuals, the only ones that contribute.
    pub replicas_used: usize,
}

/// Estimate the pair correlation function from one snapshot per replica on
/// the torus. Shell edges must be increasing and stay within half the domain
/// length, where minimal-image distances are unambiguous. The estimator is
/// normalized so that a homogeneous Poisson pattern gives 1 in expectation.
pub fn pair_correlation(
    replicas: &[&[Point]],
    dim: usize,
    length: f64,
    edges: &[f64],
) -> Result<PairCorrelation> {
    if !(dim == 1 || dim == 2) {
        return Err(CoreError::InvalidArgument(format!(
            "pair correlation supports dimensions 1 and 2, got {dim}"
        )));
    }
    if edges.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "at least two shell edges are required".into(),
        ));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) || edges[0] < 0.0 {
        return Err(CoreError::InvalidArgument(
            "shell edges must be nonnegative and strictly increasing".into(),
        ));
    }
    if *edges.last().unwrap() > length / 2.0 {
        return Err(CoreError::InvalidArgument(
            "shell edges must stay within half the domain length".into(),
        ));
    }

    let space = Space::torus(length)?;
    let shells = edges.len() - 1;
    let volume = length.powi(dim as i32);
    let shell_volume: Vec<f64> = (0..shells)
        .map(|s| match dim {
            1 => 2.0 * (edges[s + 1] - edges[s]),
            _ => std::f64::consts::PI * (edges[s + 1] * edges[s + 1] - edges[s] * edges[s]),
        })
        .collect();

    let mut mean = vec![0.0; shells];
    let mut second = vec![0.0; shells];
    let mut used = 0usize;
    for snapshot in replicas {
        let n = snapshot.len();
        if n < 2 {
            continue;
        }
        used += 1;
        let mut histogram = vec![0.0; shells];
        for i in 0..n {
            for j in (i + 1)..n {
                let r = space.distance(snapshot[i], snapshot[j], dim);
                if r < edges[0] || r >= edges[shells] {
                    continue;
                }
                let s = edges[..shells].partition_point(|e| *e <= r) - 1;
                histogram[s] += 1.0;
            }
        }
        let norm = n as f64 * (n - 1) as f64 / (2.0 * volume);
        for s in 0..shells {
            let g = histogram[s] / (norm * shell_volume[s]);
            mean[s] += g;
            second[s] += g * g;
        }
    }
    if used == 0 {
        return Err(CoreError::InvalidArgument(
            "pair correlation needs at least one replica with two individuals".into(),
        ));
    }
    for s in 0..shells {
        mean[s] /= used as f64;
        second[s] /= used as f64;
    }
    let stderr = if used > 1 {
        (0..shells)
            .map(|s| {
                let var =
                    ((second[s] - mean[s] * mean[s]) * used as f64 / (used - 1) as f64).max(0.0);
                (var / used as f64).sqrt()
            })
            .collect()
    } else {
        vec![0.0; shells]
    };

    Ok(PairCorrelation {
        shell_lower: edges[..shells].to_vec(),
        shell_upper: edges[1..].to_vec(),
        mean,
        stderr,
        replicas_used: used,
    })
}
