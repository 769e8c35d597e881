//! Scaling study connecting the particle system to the kinetic equation.
//!
//! At scaling strength `eps` the interaction kernels are damped to
//! `eps * phi` and `eps * b` while the initial intensity is blown up to
//! `rho_0 / eps`; the rescaled empirical density `eps * (counts / volume)`
//! then approaches the solution of the kinetic equation as `eps` shrinks.
//! The harness runs replicas across a ladder of scaling strengths, bins the
//! scaled populations, and reports the distance to the deterministic solution
//! together with a bootstrap standard error, so a table of rows can show the
//! error shrinking along the ladder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::ibm::{density_histogram, poisson_points, run, RunPlan, SimState};
use crate::kinetics::{integrate, DensityField, Grid, KineticOps, Scheme, SolverConfig};
use crate::model::ModelParams;

/// Interaction kernels damped by `epsilon`, everything else untouched.
///
/// The factor `1/epsilon` on the birth intensity and the factor `epsilon` on
/// the dispersal kernel cancel exactly, which is why only the two interaction
/// kernels change.
pub fn scaled_params(params: &ModelParams, epsilon: f64) -> Result<ModelParams> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "scaling strength must lie in (0, 1], got {epsilon}"
        )));
    }
    ModelParams::new(
        params.mortality(),
        params.fertility(),
        *params.dispersal_kernel(),
        params.enhancement_kernel().scale_values(epsilon)?,
        params.suppression_kernel().scale_values(epsilon)?,
        params.mechanism(),
        params.dispersal(),
    )
}

#[derive(Clone, Debug)]
pub struct LimitStudyPlan {
    /// Scaling strengths to simulate, each in `(0, 1]`.
    pub epsilons: Vec<f64>,
    pub replicas: usize,
    /// Comparison times, strictly increasing and positive.
    pub times: Vec<f64>,
    /// Homogeneous initial density of the limit problem.
    pub initial_density: f64,
    pub length: f64,
    /// Histogram bins per dimension for the empirical density.
    pub bins_per_dim: usize,
    /// Kinetic grid cells per dimension; must be a multiple of the bins so
    /// the reference coarse-grains exactly onto the histogram.
    pub grid_cells_per_dim: usize,
    /// Time step for the kinetic reference solution.
    pub dt: f64,
    pub seed: u64,
    /// Event cap per replica (guards supercritical parameters); 0 disables.
    pub max_events_per_replica: u64,
    /// Bootstrap resamples for the standard error of the error norm.
    pub bootstrap_resamples: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LimitStudyRow {
    pub epsilon: f64,
    pub time: f64,
    /// Distance between the replica-averaged rescaled density and the kinetic
    /// solution, in the domain L2 norm.
    pub l2_error: f64,
    /// Bootstrap standard error of `l2_error` over replicas.
    pub stderr: f64,
}

pub fn run_limit_study(params: &ModelParams, plan: &LimitStudyPlan) -> Result<Vec<LimitStudyRow>> {
    if plan.epsilons.is_empty() {
        return Err(CoreError::InvalidArgument(
            "at least one scaling strength is required".into(),
        ));
    }
    for &e in &plan.epsilons {
        if !(e > 0.0 && e <= 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "scaling strength must lie in (0, 1], got {e}"
            )));
        }
    }
    if plan.replicas < 2 {
        return Err(CoreError::InvalidArgument(
            "at least two replicas are needed for an error bar".into(),
        ));
    }
    if plan.times.is_empty() || plan.times[0] <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "comparison times must be positive".into(),
        ));
    }
    if plan.times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidArgument(
            "comparison times must be strictly increasing".into(),
        ));
    }
    if plan.bins_per_dim == 0 || !plan.grid_cells_per_dim.is_multiple_of(plan.bins_per_dim) {
        return Err(CoreError::InvalidArgument(format!(
            "kinetic grid ({} cells) must be a multiple of the histogram bins ({})",
            plan.grid_cells_per_dim, plan.bins_per_dim
        )));
    }
    if !(plan.initial_density >= 0.0) {
        return Err(CoreError::InvalidArgument(
            "initial density must be nonnegative".into(),
        ));
    }
    let dim = params.dim();

    // Deterministic reference: solve the kinetic equation once per time.
    let grid = Grid::new(dim, plan.grid_cells_per_dim, plan.length)?;
    let ops = KineticOps::new(params, grid)?;
    let rho0 = DensityField::constant(grid, plan.initial_density);
    let mut references = Vec::with_capacity(plan.times.len());
    for &t in &plan.times {
        let traj = integrate(
            &ops,
            &rho0,
            &SolverConfig {
                scheme: Scheme::RungeKutta4,
                dt: plan.dt,
                t_end: t,
                record_every: usize::MAX,
            },
        )?;
        references.push(coarse_grain(
            traj.final_field(),
            plan.bins_per_dim,
            plan.grid_cells_per_dim,
            dim,
        ));
    }

    let bins = plan.bins_per_dim.pow(dim as u32);
    let cell_volume = (plan.length / plan.bins_per_dim as f64).powi(dim as i32);
    let t_max = *plan.times.last().unwrap();

    let mut rows = Vec::new();
    for (eps_index, &eps) in plan.epsilons.iter().enumerate() {
        let effective = scaled_params(params, eps)?;
        // One scaled-density vector per replica and time.
        let mut per_time: Vec<Vec<Vec<f64>>> = vec![Vec::new(); plan.times.len()];
        for replica in 0..plan.replicas {
            let stream = plan
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(
                    (eps_index as u64) * (plan.replicas as u64 + 1) + replica as u64 + 1,
                ));
            let mut init_rng = ChaCha8Rng::seed_from_u64(stream ^ 0x5151_5151_5151_5151);
            let initial = poisson_points(
                plan.initial_density / eps,
                plan.length,
                dim,
                &mut init_rng,
            )?;
            let mut state = SimState::new(
                &effective,
                plan.length,
                &initial,
                stream ^ 0xC3C3_C3C3_C3C3_C3C3,
                50_000,
            )?;
            let outcome = run(
                &mut state,
                &RunPlan {
                    t_end: t_max,
                    sample_interval: t_max,
                    snapshot_times: plan.times.clone(),
                    max_events: plan.max_events_per_replica,
                },
            )?;
            for (ti, snap) in outcome.snapshots.iter().enumerate() {
                let views: Vec<&[crate::geometry::Point]> = vec![&snap.positions];
                let field =
                    density_histogram(&views, dim, plan.length, plan.bins_per_dim, eps)?;
                per_time[ti].push(field.mean);
            }
        }

        for (ti, replica_fields) in per_time.iter().enumerate() {
            if replica_fields.len() != plan.replicas {
                return Err(CoreError::StructuralFailure(format!(
                    "expected {} replica snapshots at time {}, found {}",
                    plan.replicas,
                    plan.times[ti],
                    replica_fields.len()
                )));
            }
            let reference = &references[ti];
            let l2_error = l2_distance(&mean_field(replica_fields, bins), reference, cell_volume);

            // Bootstrap over replicas for the error bar.
            let mut boot_rng =
                ChaCha8Rng::seed_from_u64(plan.seed ^ 0xB007_0000 ^ (eps_index as u64) << 8 ^ ti as u64);
            let b = plan.bootstrap_resamples.max(2);
            let mut boots = Vec::with_capacity(b);
            for _ in 0..b {
                let mut acc = vec![0.0; bins];
                for _ in 0..plan.replicas {
                    let pick = rand::Rng::random_range(&mut boot_rng, 0..plan.replicas);
                    for (a, v) in acc.iter_mut().zip(replica_fields[pick].iter()) {
                        *a += v;
                    }
                }
                for a in acc.iter_mut() {
                    *a /= plan.replicas as f64;
                }
                boots.push(l2_distance(&acc, reference, cell_volume));
            }
            let boot_mean = boots.iter().sum::<f64>() / b as f64;
            let var = boots
                .iter()
                .map(|x| (x - boot_mean) * (x - boot_mean))
                .sum::<f64>()
                / (b - 1) as f64;
            rows.push(LimitStudyRow {
                epsilon: eps,
                time: plan.times[ti],
                l2_error,
                stderr: var.sqrt(),
            });
        }
    }
    Ok(rows)
}

fn mean_field(replica_fields: &[Vec<f64>], bins: usize) -> Vec<f64> {
    let mut mean = vec![0.0; bins];
    for field in replica_fields {
        for (m, v) in mean.iter_mut().zip(field.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= replica_fields.len() as f64;
    }
    mean
}

fn l2_distance(a: &[f64], b: &[f64], cell_volume: f64) -> f64 {
    (a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        * cell_volume)
        .sqrt()
}

/// Average the kinetic field over blocks so it lives on the histogram bins.
fn coarse_grain(field: &DensityField, bins_per_dim: usize, cells_per_dim: usize, dim: usize) -> Vec<f64> {
    let factor = cells_per_dim / bins_per_dim;
    match dim {
        1 => field
            .values()
            .chunks(factor)
            .map(|chunk| chunk.iter().sum::<f64>() / factor as f64)
            .collect(),
        _ => {
            let mut out = vec![0.0; bins_per_dim * bins_per_dim];
            for bx in 0..bins_per_dim {
                for by in 0..bins_per_dim {
                    let mut acc = 0.0;
                    for ix in 0..factor {
                        for iy in 0..factor {
                            let row = bx * factor + ix;
                            let col = by * factor + iy;
                            acc += field.values()[row * cells_per_dim + col];
                        }
                    }
                    out[bx * bins_per_dim + by] = acc / (factor * factor) as f64;
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::model::{Dispersal, Mechanism};

    fn study_model() -> ModelParams {
        ModelParams::new(
            2.0,
            1.0,
            KernelSpec::top_hat(1, 1.0, 0.5).unwrap(),
            KernelSpec::zero(1),
            KernelSpec::top_hat(1, 1.0, 0.5).unwrap(),
            Mechanism::Establishment,
            Dispersal::Independent,
        )
        .unwrap()
    }

    #[test]
    fn scaling_damps_only_the_interaction_kernels() {
        let params = study_model();
        let scaled = scaled_params(&params, 0.25).unwrap();
        assert_eq!(scaled.mortality(), 2.0);
        assert_eq!(scaled.fertility(), 1.0);
        assert!((scaled.dispersal_kernel().l1_norm() - 1.0).abs() < 1e-12);
        assert!((scaled.suppression_kernel().l1_norm() - 0.25).abs() < 1e-12);
        assert!(scaled_params(&params, 0.0).is_err());
        assert!(scaled_params(&params, 1.5).is_err());
    }

    #[test]
    fn limit_rows_cover_the_ladder_and_shrink() {
        let params = study_model();
        let plan = LimitStudyPlan {
            epsilons: vec![1.0, 0.125],
            replicas: 48,
            times: vec![0.5],
            initial_density: 1.0,
            length: 10.0,
            bins_per_dim: 10,
            grid_cells_per_dim: 80,
            dt: 0.01,
            seed: 9090,
            max_events_per_replica: 200_000,
            bootstrap_resamples: 120,
        };
        let rows = run_limit_study(&params, &plan).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.l2_error.is_finite() && row.l2_error >= 0.0);
            assert!(row.stderr > 0.0);
        }
        let coarse = rows.iter().find(|r| r.epsilon == 1.0).unwrap();
        let fine = rows.iter().find(|r| r.epsilon == 0.125).unwrap();
        assert!(
            fine.l2_error < coarse.l2_error + 2.0 * (fine.stderr + coarse.stderr),
            "error should not grow along the ladder: {} vs {}",
            fine.l2_error,
            coarse.l2_error
        );
    }
}
