//! The five subcommands. Each one reads the validated config, drives the
//! core library, writes CSV tables under the output directory (every file
//! opens with a provenance header), and reports a domain failure through the
//! error type so the process exit code stays honest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecokin_core::conditions::{
    check_kinetic_fixed_point, check_vlasov_regime, check_wellposedness, ConditionReport, Verdict,
};
use ecokin_core::ibm::{poisson_points, run, RunPlan, SimState};
use ecokin_core::kinetics::{
    homogeneous_equilibria, integrate, picard_solve, Grid, KineticOps, PicardConfig, SolverConfig,
};
use ecokin_core::mesoscopic::{run_limit_study, LimitStudyPlan};
use ecokin_core::model::{Mechanism, ModelParams};
use ecokin_core::verify::{run_identity_suite, Corruption, SuiteOptions};

use crate::config::{IbmInitial, RunConfig};
use crate::provenance::Provenance;
use crate::CliError;

pub struct Ctx {
    pub command_line: String,
    pub config_hash: u64,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
}

impl Ctx {
    fn provenance(&self, seed: Option<u64>) -> Provenance {
        Provenance {
            command_line: self.command_line.clone(),
            config_hash: self.config_hash,
            seed,
        }
    }
}

fn write_table(dir: &Path, name: &str, prov: &Provenance, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, format!("{}{}", prov.header(), body))
        .map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))
}

fn verdict_text(v: Verdict) -> &'static str {
    match v {
        Verdict::Satisfied => "satisfied",
        Verdict::Violated => "violated",
        Verdict::Boundary => "boundary",
    }
}

pub fn cmd_check(config: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let params = config.build_params()?;
    let defaults = Default::default();
    let checks = config.checks.as_ref().unwrap_or(&defaults);
    let ball_radius = checks.ball_radius.unwrap_or(checks.alpha * checks.big_c);
    let which: Vec<String> = checks.which.clone().unwrap_or_else(|| {
        vec!["well-posed".into(), "vlasov".into(), "fixed-point".into()]
    });

    let mut reports: Vec<ConditionReport> = Vec::new();
    for name in &which {
        let report = match name.as_str() {
            "well-posed" => check_wellposedness(&params, checks.big_c),
            "vlasov" => check_vlasov_regime(&params, checks.big_c),
            "fixed-point" => check_kinetic_fixed_point(&params, ball_radius),
            other => {
                return Err(CliError::Config(format!(
                    "checks.which: unknown check \"{other}\" \
                     (expected well-posed, vlasov, or fixed-point)"
                )))
            }
        }
        .map_err(|e| CliError::Domain(e.to_string()))?;
        reports.push(report);
    }

    let mut csv = String::from("check,field,value\n");
    for report in &reports {
        let label = report.check.label();
        println!(
            "{label}: lhs={} rhs={} verdict={}",
            report.lhs,
            report.rhs,
            verdict_text(report.verdict)
        );
        writeln!(csv, "{label},lhs,{}", report.lhs).unwrap();
        writeln!(csv, "{label},rhs,{}", report.rhs).unwrap();
        writeln!(csv, "{label},verdict,{}", verdict_text(report.verdict)).unwrap();
        for (key, value) in &report.constants {
            println!("  {key} = {value}");
            writeln!(csv, "{label},{key},{value}").unwrap();
        }
        for note in &report.notes {
            println!("  note: {note}");
        }
    }
    write_table(&ctx.out_dir, "checks.csv", &ctx.provenance(None), &csv)?;

    let failing: Vec<&str> = reports
        .iter()
        .filter(|r| !r.satisfied())
        .map(|r| r.check.label())
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "condition not satisfied: {}",
            failing.join(", ")
        )))
    }
}

pub fn cmd_simulate(config: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let params = config.build_params()?;
    let domain = config.domain_section()?;
    let ibm = config
        .ibm
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [ibm] section".into()))?;
    if ibm.replicas == 0 {
        return Err(CliError::Config("ibm.replicas must be at least 1".into()));
    }
    let base_seed = ctx.seed_override.unwrap_or(ibm.seed);
    let plan = RunPlan {
        t_end: ibm.t_end,
        sample_interval: ibm.sample_interval,
        snapshot_times: ibm.snapshot_times.clone(),
        max_events: ibm.max_events,
    };

    let coord_header = if domain.dim == 1 { "x1" } else { "x1,x2" };
    let mut manifest = String::from("replica,seed,events,final_population,extinct\n");
    let mut slopes: Vec<f64> = Vec::new();
    let mut final_populations: Vec<f64> = Vec::new();
    for replica in 0..ibm.replicas {
        let seed = base_seed.wrapping_add(replica as u64);
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1217_AC5E_ED00_0001);
        let initial = match &ibm.initial {
            IbmInitial::Poisson { density } => {
                poisson_points(*density, domain.length, domain.dim, &mut init_rng)
                    .map_err(|e| CliError::Config(format!("ibm.initial: {e}")))?
            }
            IbmInitial::Fixed { count } => (0..*count)
                .map(|_| {
                    let mut p = [0.0; 3];
                    for c in p.iter_mut().take(domain.dim) {
                        *c = rand::Rng::random_range(&mut init_rng, 0.0..domain.length);
                    }
                    p
                })
                .collect(),
        };
        let initial_count = initial.len();
        let mut state = SimState::new(
            &params,
            domain.length,
            &initial,
            seed ^ 0x51AB_1E00_0000_0002,
            ibm.audit_interval,
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let outcome = run(&mut state, &plan).map_err(|e| CliError::Domain(e.to_string()))?;

        let mut trajectory = String::from("t,population,births,deaths,rejections,extinct\n");
        for point in &outcome.samples {
            writeln!(
                trajectory,
                "{},{},{},{},{},{}",
                point.time,
                point.population,
                point.births,
                point.deaths,
                point.rejections,
                u8::from(point.population == 0)
            )
            .unwrap();
        }
        let prov = ctx.provenance(Some(seed));
        write_table(
            &ctx.out_dir,
            &format!("trajectory_{replica}.csv"),
            &prov,
            &trajectory,
        )?;

        let mut snapshots = format!("t,particle_id,{coord_header}\n");
        for snap in &outcome.snapshots {
            for (id, pos) in snap.ids.iter().zip(snap.positions.iter()) {
                if domain.dim == 1 {
                    writeln!(snapshots, "{},{},{}", snap.time, id, pos[0]).unwrap();
                } else {
                    writeln!(snapshots, "{},{},{},{}", snap.time, id, pos[0], pos[1]).unwrap();
                }
            }
        }
        write_table(
            &ctx.out_dir,
            &format!("snapshots_{replica}.csv"),
            &prov,
            &snapshots,
        )?;

        writeln!(
            manifest,
            "{replica},{seed},{},{},{}",
            outcome.events,
            outcome.final_population,
            u8::from(outcome.extinct)
        )
        .unwrap();
        final_populations.push(outcome.final_population as f64);
        if initial_count > 0 && outcome.final_population > 0 && ibm.t_end > 0.0 {
            slopes.push((outcome.final_population as f64 / initial_count as f64).ln() / ibm.t_end);
        }
    }
    let prov = ctx.provenance(Some(base_seed));
    write_table(&ctx.out_dir, "manifest.csv", &prov, &manifest)?;

    let mean_final = final_populations.iter().sum::<f64>() / final_populations.len() as f64;
    let mut summary = String::from("key,value\n");
    writeln!(summary, "replicas,{}", ibm.replicas).unwrap();
    writeln!(summary, "t_end,{}", ibm.t_end).unwrap();
    writeln!(summary, "mean_final_population,{mean_final}").unwrap();
    if slopes.len() >= 2 {
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let var = slopes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / (slopes.len() - 1) as f64;
        let stderr = (var / slopes.len() as f64).sqrt();
        writeln!(summary, "growth_slope_mean,{mean}").unwrap();
        writeln!(summary, "growth_slope_stderr,{stderr}").unwrap();
        writeln!(summary, "growth_slope_replicas,{}", slopes.len()).unwrap();
        println!("growth slope {mean} (stderr {stderr}, {} replicas)", slopes.len());
    }
    write_table(&ctx.out_dir, "summary.csv", &prov, &summary)?;
    println!(
        "{} replicas to t={}, mean final population {mean_final}",
        ibm.replicas, ibm.t_end
    );
    Ok(())
}

pub fn cmd_solve(config: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let params = config.build_params()?;
    let domain = config.domain_section()?;
    let kinetics = config
        .kinetics
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [kinetics] section".into()))?;
    let scheme = config.scheme()?;
    let grid = Grid::new(domain.dim, domain.grid_cells, domain.length)
        .map_err(|e| CliError::Config(format!("domain: {e}")))?;
    let rho0 = kinetics.initial.build(grid)?;
    let ops = KineticOps::new(&params, grid).map_err(|e| CliError::Config(e.to_string()))?;
    let solver = SolverConfig {
        scheme,
        dt: kinetics.dt,
        t_end: kinetics.t_end,
        record_every: kinetics.record_every,
    };
    let trajectory = integrate(&ops, &rho0, &solver).map_err(|e| CliError::Domain(e.to_string()))?;

    let coord_header = if domain.dim == 1 { "x1" } else { "x1,x2" };
    let mut density = format!("t,cell,{coord_header},rho\n");
    for (t, field) in trajectory.times.iter().zip(trajectory.fields.iter()) {
        for (idx, value) in field.values().iter().enumerate() {
            let center = grid.center(idx);
            if domain.dim == 1 {
                writeln!(density, "{t},{idx},{},{value}", center[0]).unwrap();
            } else {
                writeln!(density, "{t},{idx},{},{},{value}", center[0], center[1]).unwrap();
            }
        }
    }
    let prov = ctx.provenance(None);
    write_table(&ctx.out_dir, "density.csv", &prov, &density)?;

    let final_field = trajectory.final_field();
    let volume = domain.length.powi(domain.dim as i32);
    let final_mean = final_field.mass() / volume;
    let equilibria = homogeneous_equilibria(&params);
    let nearest = equilibria
        .iter()
        .min_by(|a, b| {
            (a.density - final_mean)
                .abs()
                .total_cmp(&(b.density - final_mean).abs())
        })
        .map(|e| e.density);

    let mut summary = String::from("key,value\n");
    writeln!(summary, "scheme,{}", kinetics.scheme).unwrap();
    writeln!(summary, "dt,{}", kinetics.dt).unwrap();
    writeln!(summary, "t_end,{}", kinetics.t_end).unwrap();
    writeln!(summary, "final_mass,{}", final_field.mass()).unwrap();
    writeln!(summary, "final_sup,{}", final_field.sup_norm()).unwrap();
    writeln!(summary, "final_min,{}", final_field.min_value()).unwrap();
    writeln!(summary, "final_mean,{final_mean}").unwrap();
    writeln!(summary, "equilibrium_count,{}", equilibria.len()).unwrap();
    if let Some(u) = nearest {
        writeln!(summary, "nearest_equilibrium,{u}").unwrap();
        writeln!(summary, "equilibrium_gap,{}", (final_mean - u).abs()).unwrap();
    }
    for warning in &trajectory.warnings {
        writeln!(summary, "warning,{}", warning.replace(',', ";")).unwrap();
    }

    let mut picard_failed = None;
    if kinetics.picard {
        let result = picard_solve(
            &ops,
            &rho0,
            &PicardConfig {
                dt: kinetics.dt,
                t_end: kinetics.t_end,
                max_iterations: kinetics.picard_max_iterations,
                tolerance: kinetics.picard_tolerance,
                ball_radius: kinetics.picard_ball_radius,
            },
        )
        .map_err(|e| CliError::Domain(e.to_string()))?;
        let mut picard_csv = String::from("iteration,delta_norm,ratio\n");
        for (i, it) in result.iterations.iter().enumerate() {
            match it.ratio {
                Some(r) => writeln!(picard_csv, "{},{},{r}", i + 1, it.delta).unwrap(),
                None => writeln!(picard_csv, "{},{},", i + 1, it.delta).unwrap(),
            }
        }
        write_table(&ctx.out_dir, "picard.csv", &prov, &picard_csv)?;
        let cross = result
            .fields
            .last()
            .map(|f| f.sup_distance(final_field))
            .unwrap_or(f64::NAN);
        writeln!(summary, "picard_converged,{}", result.converged).unwrap();
        writeln!(summary, "picard_iterations,{}", result.iterations.len()).unwrap();
        writeln!(summary, "picard_max_sup,{}", result.max_sup_norm).unwrap();
        if let Some(ok) = result.ball_ok {
            writeln!(summary, "picard_ball_ok,{ok}").unwrap();
        }
        writeln!(summary, "cross_difference,{cross}").unwrap();
        println!("picard cross difference {cross} after {} sweeps", result.iterations.len());
        if !result.converged {
            picard_failed = Some(format!(
                "fixed-point iteration did not converge in {} sweeps (last delta {})",
                result.iterations.len(),
                result.iterations.last().map(|i| i.delta).unwrap_or(f64::NAN)
            ));
        }
    }

    if kinetics.compare_mechanisms {
        let other_mechanism = match params.mechanism() {
            Mechanism::Establishment => Mechanism::Fecundity,
            Mechanism::Fecundity => Mechanism::Establishment,
        };
        let other = ModelParams::new(
            params.mortality(),
            params.fertility(),
            *params.dispersal_kernel(),
            *params.enhancement_kernel(),
            *params.suppression_kernel(),
            other_mechanism,
            params.dispersal(),
        )
        .map_err(|e| CliError::Domain(e.to_string()))?;
        let other_ops = KineticOps::new(&other, grid).map_err(|e| CliError::Domain(e.to_string()))?;
        let other_trajectory =
            integrate(&other_ops, &rho0, &solver).map_err(|e| CliError::Domain(e.to_string()))?;
        let mut gap_csv = String::from("t,sup_difference\n");
        let mut final_gap = 0.0;
        for ((t, a), b) in trajectory
            .times
            .iter()
            .zip(trajectory.fields.iter())
            .zip(other_trajectory.fields.iter())
        {
            let gap = a.sup_distance(b);
            final_gap = gap;
            writeln!(gap_csv, "{t},{gap}").unwrap();
        }
        write_table(&ctx.out_dir, "mechanism_gap.csv", &prov, &gap_csv)?;
        writeln!(summary, "final_mechanism_gap,{final_gap}").unwrap();
        println!("mechanism gap at t={}: {final_gap}", kinetics.t_end);
    }

    write_table(&ctx.out_dir, "solve_summary.csv", &prov, &summary)?;
    println!(
        "solved to t={} on {} cells, final mean density {final_mean}",
        kinetics.t_end,
        grid.cell_count()
    );
    match picard_failed {
        Some(msg) => Err(CliError::Domain(msg)),
        None => Ok(()),
    }
}

pub fn cmd_limit_study(config: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let params = config.build_params()?;
    let domain = config.domain_section()?;
    let limit = config
        .limit
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [limit] section".into()))?;
    if limit.epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(CliError::Config(
            "limit.epsilons must be strictly decreasing".into(),
        ));
    }
    let grid_cells = limit.grid_cells.unwrap_or(domain.grid_cells);
    if limit.bins == 0 || grid_cells % limit.bins != 0 {
        return Err(CliError::Config(format!(
            "limit.bins ({}) must divide the kinetic grid ({grid_cells} cells)",
            limit.bins
        )));
    }
    let plan = LimitStudyPlan {
        epsilons: limit.epsilons.clone(),
        replicas: limit.replicas,
        times: limit.times.clone(),
        initial_density: limit.initial_density,
        length: domain.length,
        bins_per_dim: limit.bins,
        grid_cells_per_dim: grid_cells,
        dt: limit.dt,
        seed: ctx.seed_override.unwrap_or(limit.seed),
        max_events_per_replica: limit.max_events,
        bootstrap_resamples: limit.bootstrap,
    };
    let rows = run_limit_study(&params, &plan).map_err(|e| CliError::Domain(e.to_string()))?;

    let mut csv = String::from("eps,t,L2_error,stderr\n");
    for row in &rows {
        writeln!(csv, "{},{},{},{}", row.epsilon, row.time, row.l2_error, row.stderr).unwrap();
        println!(
            "eps={} t={}: L2 error {} (stderr {})",
            row.epsilon, row.time, row.l2_error, row.stderr
        );
    }
    write_table(
        &ctx.out_dir,
        "limit.csv",
        &ctx.provenance(Some(plan.seed)),
        &csv,
    )?;

    // The table must shrink along the ladder at every recorded time, up to
    // twice the combined standard errors.
    let mut violations = Vec::new();
    for &t in &limit.times {
        let at_t: Vec<_> = rows.iter().filter(|r| r.time == t).collect();
        for pair in at_t.windows(2) {
            let (coarse, fine) = (pair[0], pair[1]);
            if fine.l2_error > coarse.l2_error + 2.0 * (fine.stderr + coarse.stderr) {
                violations.push(format!(
                    "t={t}: eps={} error {} exceeds eps={} error {}",
                    fine.epsilon, fine.l2_error, coarse.epsilon, coarse.l2_error
                ));
            }
        }
    }
    if violations.is_empty() {
        println!("error decreases along the ladder at every recorded time");
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "limit errors did not decrease: {}",
            violations.join("; ")
        )))
    }
}

pub fn cmd_verify(config: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let section = config.verify.as_ref();
    let defaults = SuiteOptions::default();
    let opts = SuiteOptions {
        seed: ctx
            .seed_override
            .or(section.and_then(|s| s.seed))
            .unwrap_or(defaults.seed),
        expansion_instances: section
            .and_then(|s| s.expansion_instances)
            .unwrap_or(defaults.expansion_instances),
        transform_instances: section
            .and_then(|s| s.transform_instances)
            .unwrap_or(defaults.transform_instances),
        mc_samples: section
            .and_then(|s| s.mc_samples)
            .unwrap_or(defaults.mc_samples),
        corruption: match section.and_then(|s| s.corrupt_expansion) {
            Some(offset) if offset != 0.0 => Corruption::PerturbExpansion(offset),
            _ => Corruption::None,
        },
    };
    let reports = run_identity_suite(&opts).map_err(|e| CliError::Domain(e.to_string()))?;

    let mut csv = String::from("family,instances,deviation,tol,passed,vacuous\n");
    let mut failed = Vec::new();
    for report in &reports {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            report.family, report.instances, report.deviation, report.tol, report.passed,
            report.vacuous
        )
        .unwrap();
        let status = if report.vacuous {
            "vacuous pass (0 instances)".to_string()
        } else if report.passed {
            format!("pass (max deviation {})", report.deviation)
        } else {
            format!("FAIL (deviation {} > tol {})", report.deviation, report.tol)
        };
        println!("{}: {status}", report.family);
        if !report.passed && !report.vacuous {
            failed.push(report.family);
        }
    }
    write_table(
        &ctx.out_dir,
        "verify.csv",
        &ctx.provenance(Some(opts.seed)),
        &csv,
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "identity families failed: {}",
            failed.join(", ")
        )))
    }
}
