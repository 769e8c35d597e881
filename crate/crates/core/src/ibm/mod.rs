//! Exact event-driven simulation of the spatial birth-and-death process.
//!
//! Every event advances an exponential clock driven by the total rate
//! currently in force, so trajectories follow the model law without time
//! discretization error:
//!
//! * deaths occur at constant rate per individual;
//! * under establishment regulation, births are proposed from the parents'
//!   dispersal-weighted rates and thinned by the crowding factor at the
//!   newborn's location; rejected proposals still advance the clock, which is
//!   what makes the thinning exact;
//! * under fecundity regulation the crowding factor sits on the parent, the
//!   dispersal integral cancels against the unit kernel mass, and every drawn
//!   birth is accepted.
//!
//! Per-individual crowding sums are cached and updated incrementally as
//! particles come and go; periodic audits recompute them from scratch and
//! fail loudly if the incremental state has drifted.

mod cells;
mod estimators;
mod sampling;

pub use estimators::{density_histogram, pair_correlation, BinnedField, PairCorrelation};
pub use sampling::{poisson_points, sample_displacement};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::geometry::{Point, Space};
use crate::ibm::cells::CellGrid;
use crate::model::{Mechanism, ModelParams};

/// Tolerance for the periodic audit of incrementally maintained sums.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default)]
pub struct EventCounts {
    pub births: u64,
    pub deaths: u64,
    pub rejections: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Birth,
    Death,
    /// An establishment proposal that failed the crowding draw; the clock
    /// still advanced.
    RejectedBirth,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub dt: f64,
    pub kind: EventKind,
}

#[derive(Clone)]
pub struct SimState {
    params: ModelParams,
    dim: usize,
    length: f64,
    space: Space,
    rng: ChaCha8Rng,
    time: f64,
    positions: Vec<Point>,
    ids: Vec<u64>,
    next_id: u64,
    /// Crowding energy of each individual against the rest (suppression sums).
    energy: Vec<f64>,
    /// Dispersal-enhancement sums of each individual against the rest.
    crowd: Vec<f64>,
    cell_of: Vec<u32>,
    cells: CellGrid,
    total_crowd: f64,
    total_fecundity_weight: f64,
    counts: EventCounts,
    audit_interval: u64,
    events_since_audit: u64,
    scratch: Vec<u32>,
}

impl SimState {
    /// Build a simulation over the torus `[0, length)^d`.
    ///
    /// Kernel ranges must fit inside half the domain so that minimal-image
    /// interactions are unambiguous. `audit_interval` is the event count
    /// between cache audits; zero disables them.
    pub fn new(
        params: &ModelParams,
        length: f64,
        initial: &[Point],
        seed: u64,
        audit_interval: u64,
    ) -> Result<Self> {
        let dim = params.dim();
        if dim > 2 {
            return Err(CoreError::InvalidModel(format!(
                "simulation supports dimensions 1 and 2, got {dim}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(CoreError::InvalidDomain(format!(
                "domain length must be finite and positive, got {length}"
            )));
        }
        let reach = params.max_cutoff();
        if !(reach < length / 2.0) {
            return Err(CoreError::InvalidDomain(format!(
                "kernel range {reach} must stay below half the domain length {length}"
            )));
        }
        let dispersal_reach = params.dispersal_kernel().support_radius();
        if !dispersal_reach.is_finite() {
            return Err(CoreError::InvalidModel(
                "dispersal kernel needs a finite range for displacement sampling".into(),
            ));
        }

        let space = Space::torus(length)?;
        let interaction_range = {
            let phi = params.suppression_kernel();
            let b = params.enhancement_kernel();
            let mut r: f64 = 0.0;
            if phi.l1_norm() > 0.0 {
                r = r.max(phi.support_radius());
            }
            if b.l1_norm() > 0.0 {
                r = r.max(b.support_radius());
            }
            r
        };

        let mut state = SimState {
            params: params.clone(),
            dim,
            length,
            space,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            positions: Vec::new(),
            ids: Vec::new(),
            next_id: 0,
            energy: Vec::new(),
            crowd: Vec::new(),
            cell_of: Vec::new(),
            cells: CellGrid::new(length, interaction_range, dim),
            total_crowd: 0.0,
            total_fecundity_weight: 0.0,
            counts: EventCounts::default(),
            audit_interval,
            events_since_audit: 0,
            scratch: Vec::new(),
        };
        for p in initial {
            let wrapped = state.space.wrap(*p, dim);
            state.insert_particle(wrapped);
        }
        Ok(state)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn population(&self) -> usize {
        self.positions.len()
    }

    pub fn domain_length(&self) -> f64 {
        self.length
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn counts(&self) -> EventCounts {
        self.counts
    }

    /// Cached suppression sums per individual, aligned with `positions`.
    pub fn energies(&self) -> &[f64] {
        &self.energy
    }

    /// Cached enhancement sums per individual, aligned with `positions`.
    pub fn crowding(&self) -> &[f64] {
        &self.crowd
    }

    pub fn is_extinct(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn death_rate_total(&self) -> f64 {
        self.params.mortality() * self.population() as f64
    }

    /// Total rate of the birth clock. For establishment this is the proposal
    /// rate before thinning; for fecundity it is the exact birth rate.
    pub fn birth_rate_total(&self) -> f64 {
        match self.params.mechanism() {
            Mechanism::Establishment => {
                self.params.fertility() * self.population() as f64 + self.total_crowd
            }
            Mechanism::Fecundity => self.total_fecundity_weight,
        }
    }

    /// Rate governing the exponential waiting time to the next event
    /// (including establishment proposals that may be rejected).
    pub fn total_event_rate(&self) -> f64 {
        self.death_rate_total() + self.birth_rate_total()
    }

    /// Crowding energy a newborn at `x` would feel from the current
    /// population.
    pub fn energy_at(&mut self, x: &Point) -> f64 {
        let phi = self.params.suppression_kernel();
        if phi.l1_norm() == 0.0 {
            return 0.0;
        }
        let mut nbrs = std::mem::take(&mut self.scratch);
        self.cells.neighbors_into(x, &mut nbrs);
        let mut acc = 0.0;
        for &j in &nbrs {
            let r = self.space.distance(*x, self.positions[j as usize], self.dim);
            acc += phi.evaluate_radial(r);
        }
        self.scratch = nbrs;
        acc
    }

    /// Advance the process by one event.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.population() == 0 {
            return Err(CoreError::InvalidArgument(
                "cannot step an extinct population".into(),
            ));
        }
        let total = self.total_event_rate();
        let u: f64 = 1.0 - self.rng.random::<f64>();
        let dt = -u.ln() / total;
        self.time += dt;
        let kind = self.apply_event()?;
        Ok(StepOutcome { dt, kind })
    }

    /// Recompute every cached sum from scratch, compare against the
    /// incremental state, and adopt the fresh values. Returns the largest
    /// deviation found; exceeding the audit tolerance is an error.
    pub fn audit_caches(&mut self) -> Result<f64> {
        self.events_since_audit = 0;
        let phi = *self.params.suppression_kernel();
        let b = *self.params.enhancement_kernel();
        let n = self.population();
        let mut fresh_energy = vec![0.0; n];
        let mut fresh_crowd = vec![0.0; n];
        let has_phi = phi.l1_norm() > 0.0;
        let has_b = b.l1_norm() > 0.0;
        if has_phi || has_b {
            let mut nbrs = Vec::new();
            for i in 0..n {
                let x = self.positions[i];
                self.cells.neighbors_into(&x, &mut nbrs);
                for &j in &nbrs {
                    let j = j as usize;
                    if j == i {
                        continue;
                    }
                    let r = self.space.distance(x, self.positions[j], self.dim);
                    if has_phi {
                        fresh_energy[i] += phi.evaluate_radial(r);
                    }
                    if has_b {
                        fresh_crowd[i] += b.evaluate_radial(r);
                    }
                }
            }
        }

        let mut deviation: f64 = 0.0;
        for i in 0..n {
            deviation = deviation.max((fresh_energy[i] - self.energy[i]).abs());
            deviation = deviation.max((fresh_crowd[i] - self.crowd[i]).abs());
        }
        let fresh_total_crowd: f64 = fresh_crowd.iter().sum();
        deviation = deviation.max((fresh_total_crowd - self.total_crowd).abs());

        let kappa = self.params.fertility();
        let fresh_fec: f64 = (0..n)
            .map(|i| (-fresh_energy[i]).exp() * (kappa + fresh_crowd[i]))
            .sum();
        if self.params.mechanism() == Mechanism::Fecundity {
            deviation = deviation.max((fresh_fec - self.total_fecundity_weight).abs());
        }

        self.energy = fresh_energy;
        self.crowd = fresh_crowd;
        self.total_crowd = fresh_total_crowd;
        self.total_fecundity_weight = fresh_fec;

        if deviation > AUDIT_TOLERANCE {
            return Err(CoreError::StructuralFailure(format!(
                "incremental rate caches drifted by {deviation:.3e}, beyond the audit tolerance \
                 {AUDIT_TOLERANCE:.1e}"
            )));
        }
        Ok(deviation)
    }

    fn parent_weight(&self, i: usize) -> f64 {
        (-self.energy[i]).exp() * (self.params.fertility() + self.crowd[i])
    }

    /// Pick an index with probability proportional to `weight`, whose sum
    /// over the population is `total` up to rounding drift.
    fn select_weighted<W: Fn(&Self, usize) -> f64>(&mut self, total: f64, weight: W) -> usize {
        let n = self.population();
        let target = self.rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for i in 0..n {
            let w = weight(self, i);
            if w > 0.0 {
                last_positive = i;
            }
            acc += w;
            if acc > target {
                return i;
            }
        }
        last_positive
    }

    fn disperse_from(&mut self, parent: usize) -> Result<Point> {
        let kernel = *self.params.dispersal_kernel();
        let disp = sample_displacement(&kernel, &mut self.rng)?;
        let mut p = self.positions[parent];
        for axis in 0..self.dim {
            p[axis] += disp[axis];
        }
        Ok(self.space.wrap(p, self.dim))
    }

    fn insert_particle(&mut self, x: Point) {
        let phi = *self.params.suppression_kernel();
        let b = *self.params.enhancement_kernel();
        let has_phi = phi.l1_norm() > 0.0;
        let has_b = b.l1_norm() > 0.0;
        let fec = self.params.mechanism() == Mechanism::Fecundity;
        let kappa = self.params.fertility();

        let mut own_energy = 0.0;
        let mut own_crowd = 0.0;
        if has_phi || has_b {
            let mut nbrs = std::mem::take(&mut self.scratch);
            self.cells.neighbors_into(&x, &mut nbrs);
            for &j in &nbrs {
                let j = j as usize;
                let r = self.space.distance(x, self.positions[j], self.dim);
                let pv = if has_phi { phi.evaluate_radial(r) } else { 0.0 };
                let bv = if has_b { b.evaluate_radial(r) } else { 0.0 };
                if pv != 0.0 || bv != 0.0 {
                    if fec {
                        self.total_fecundity_weight -= self.parent_weight(j);
                    }
                    self.energy[j] += pv;
                    self.crowd[j] += bv;
                    own_energy += pv;
                    own_crowd += bv;
                    if fec {
                        self.total_fecundity_weight += self.parent_weight(j);
                    }
                }
            }
            self.scratch = nbrs;
        }

        let idx = self.positions.len() as u32;
        let cell = self.cells.cell_of(&x);
        self.positions.push(x);
        self.energy.push(own_energy);
        self.crowd.push(own_crowd);
        self.ids.push(self.next_id);
        self.next_id += 1;
        self.cell_of.push(cell);
        self.cells.insert(idx, cell);
        self.total_crowd += 2.0 * own_crowd;
        if fec {
            self.total_fecundity_weight += (-own_energy).exp() * (kappa + own_crowd);
        }
    }

    fn remove_particle(&mut self, idx: usize) {
        let phi = *self.params.suppression_kernel();
        let b = *self.params.enhancement_kernel();
        let has_phi = phi.l1_norm() > 0.0;
        let has_b = b.l1_norm() > 0.0;
        let fec = self.params.mechanism() == Mechanism::Fecundity;
        let x = self.positions[idx];

        if has_phi || has_b {
            let mut nbrs = std::mem::take(&mut self.scratch);
            self.cells.neighbors_into(&x, &mut nbrs);
            for &j in &nbrs {
                let j = j as usize;
                if j == idx {
                    continue;
                }
                let r = self.space.distance(x, self.positions[j], self.dim);
                let pv = if has_phi { phi.evaluate_radial(r) } else { 0.0 };
                let bv = if has_b { b.evaluate_radial(r) } else { 0.0 };
                if pv != 0.0 || bv != 0.0 {
                    if fec {
                        self.total_fecundity_weight -= self.parent_weight(j);
                    }
                    self.energy[j] -= pv;
                    self.crowd[j] -= bv;
                    if fec {
                        self.total_fecundity_weight += self.parent_weight(j);
                    }
                }
            }
            self.scratch = nbrs;
        }

        self.total_crowd -= 2.0 * self.crowd[idx];
        if fec {
            self.total_fecundity_weight -= self.parent_weight(idx);
        }

        let last = self.positions.len() - 1;
        self.cells.remove(idx as u32, self.cell_of[idx]);
        self.positions.swap_remove(idx);
        self.energy.swap_remove(idx);
        self.crowd.swap_remove(idx);
        self.ids.swap_remove(idx);
        self.cell_of.swap_remove(idx);
        if idx != last {
            self.cells.rename(self.cell_of[idx], last as u32, idx as u32);
        }
    }
}

/// Sampling plan for [`run`].
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub t_end: f64,
    /// Record the population state at multiples of this interval (and at 0).
    pub sample_interval: f64,
    /// Times at which full position snapshots are taken; must be sorted.
    pub snapshot_times: Vec<f64>,
    /// Abort if this many events pass before reaching `t_end` (guards
    /// supercritical blow-up); zero means no cap.
    pub max_events: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub population: usize,
    pub births: u64,
    pub deaths: u64,
    pub rejections: u64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub ids: Vec<u64>,
    pub positions: Vec<Point>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub samples: Vec<TrajectoryPoint>,
    pub snapshots: Vec<Snapshot>,
    pub extinct: bool,
    pub events: u64,
    pub final_population: usize,
}

/// Drive a simulation to `t_end`, recording population samples and position
/// snapshots along the way. Extinction freezes the remaining records at zero.
pub fn run(state: &mut SimState, plan: &RunPlan) -> Result<RunOutcome> {
    if !(plan.t_end.is_finite() && plan.t_end >= 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "end time must be nonnegative, got {}",
            plan.t_end
        )));
    }
    if !(plan.sample_interval > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "sample interval must be positive, got {}",
            plan.sample_interval
        )));
    }
    if plan.snapshot_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(CoreError::InvalidArgument(
            "snapshot times must be sorted".into(),
        ));
    }

    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    let mut sample_index = 0u64;
    let mut snapshot_cursor = 0usize;
    let mut events = 0u64;

    let sample_time = |k: u64| k as f64 * plan.sample_interval;
    // The final sample at t_end survives rounding in the multiples.
    let sample_horizon = plan.t_end * (1.0 + 1e-12);

    let record = |state: &SimState, time: f64, samples: &mut Vec<TrajectoryPoint>| {
        let c = state.counts();
        samples.push(TrajectoryPoint {
            time,
            population: state.population(),
            births: c.births,
            deaths: c.deaths,
            rejections: c.rejections,
        });
    };
    let snap = |state: &SimState, time: f64, snapshots: &mut Vec<Snapshot>| {
        snapshots.push(Snapshot {
            time,
            ids: state.ids().to_vec(),
            positions: state.positions().to_vec(),
        });
    };

    loop {
        if state.is_extinct() {
            // Absorbing state: emit the remaining records at zero population.
            while sample_time(sample_index) <= sample_horizon {
                record(state, sample_time(sample_index), &mut samples);
                sample_index += 1;
            }
            while snapshot_cursor < plan.snapshot_times.len()
                && plan.snapshot_times[snapshot_cursor] <= plan.t_end
            {
                snap(state, plan.snapshot_times[snapshot_cursor], &mut snapshots);
                snapshot_cursor += 1;
            }
            return Ok(RunOutcome {
                samples,
                snapshots,
                extinct: true,
                events,
                final_population: 0,
            });
        }

        // Peek the waiting time by drawing the clock only; the state during
        // the wait is the current one, so records crossed by the wait use it.
        let rate = state.total_event_rate();
        let u: f64 = 1.0 - state.rng.random::<f64>();
        let dt = -u.ln() / rate;
        let t_next = state.time + dt;

        while sample_time(sample_index) <= sample_horizon && sample_time(sample_index) <= t_next {
            record(state, sample_time(sample_index), &mut samples);
            sample_index += 1;
        }
        while snapshot_cursor < plan.snapshot_times.len()
            && plan.snapshot_times[snapshot_cursor] <= t_next.min(plan.t_end)
        {
            snap(state, plan.snapshot_times[snapshot_cursor], &mut snapshots);
            snapshot_cursor += 1;
        }

        if t_next > plan.t_end {
            // The next event falls beyond the horizon; discard it. The clock
            // is memoryless, so stopping here keeps the law exact.
            while sample_time(sample_index) <= sample_horizon {
                record(state, sample_time(sample_index), &mut samples);
                sample_index += 1;
            }
            state.time = plan.t_end;
            return Ok(RunOutcome {
                samples,
                snapshots,
                extinct: false,
                events,
                final_population: state.population(),
            });
        }

        state.time = t_next;
        state.apply_event()?;
        events += 1;
        if plan.max_events > 0 && events >= plan.max_events {
            return Err(CoreError::SolverFailure(format!(
                "event budget {} exhausted at t = {:.6} with {} individuals",
                plan.max_events,
                state.time,
                state.population()
            )));
        }
    }
}

impl SimState {
    /// Choose and apply one event type using the already-advanced clock; used
    /// by [`run`], which draws the waiting time itself.
    fn apply_event(&mut self) -> Result<EventKind> {
        let n = self.population();
        let death_total = self.death_rate_total();
        let birth_total = self.birth_rate_total();
        let total = death_total + birth_total;
        let kind = if self.rng.random::<f64>() * total < death_total {
            let victim = self.rng.random_range(0..n);
            self.remove_particle(victim);
            self.counts.deaths += 1;
            EventKind::Death
        } else {
            match self.params.mechanism() {
                Mechanism::Establishment => {
                    let kappa = self.params.fertility();
                    let parent =
                        self.select_weighted(birth_total, |state, i| kappa + state.crowd[i]);
                    let newborn = self.disperse_from(parent)?;
                    let energy = self.energy_at(&newborn);
                    if self.rng.random::<f64>() < (-energy).exp() {
                        self.insert_particle(newborn);
                        self.counts.births += 1;
                        EventKind::Birth
                    } else {
                        self.counts.rejections += 1;
                        EventKind::RejectedBirth
                    }
                }
                Mechanism::Fecundity => {
                    let parent =
                        self.select_weighted(birth_total, |state, i| state.parent_weight(i));
                    let newborn = self.disperse_from(parent)?;
                    self.insert_particle(newborn);
                    self.counts.births += 1;
                    EventKind::Birth
                }
            }
        };
        self.events_since_audit += 1;
        if self.audit_interval > 0 && self.events_since_audit >= self.audit_interval {
            self.audit_caches()?;
        }
        Ok(kind)
    }
}
