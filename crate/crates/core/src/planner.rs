//! Distance-informed prefix search over obstacle-vertex sequences.
//!
//! Prefixes are popped in order of straight-line chain length
//! `‖c₁ − p⁰‖ + Σ‖cᵢ − cᵢ₋₁‖ + ‖p^f − c_N‖`. A popped prefix whose full
//! trajectory is feasible becomes the incumbent and bounds the search; every
//! popped prefix is extended by each unused vertex and the extensions whose
//! trajectories are feasible up to their last junction are queued.
//!
//! The energy mode continues from the distance result: surviving prefixes are
//! re-keyed by their chain energy, which lower-bounds the energy of every
//! extension, and searched best-first against the incumbent energy.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::{
    solve_chain, solve_chain_from, warm_start_times, BoundaryConditions, ChainProblem, ChainSolution, SolverError,
    SolverOptions,
};
use crate::feasibility::{prefix_feasible, trajectory_feasible};
use crate::geometry::{GeometryError, PolygonEnvironment};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    #[default]
    Distance,
    Energy,
    Suffix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub mode: PlanMode,
    pub solver: SolverOptions,
    /// Maximum number of queued prefixes.
    pub queue_cap: usize,
    /// Solve the extensions of a popped prefix on the rayon pool.
    pub parallel: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            mode: PlanMode::Distance,
            solver: SolverOptions::default(),
            queue_cap: 1_000_000,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SearchStats {
    pub prefixes_expanded: usize,
    pub solver_calls: usize,
    pub max_queue: usize,
    pub wall_seconds: f64,
}

impl SearchStats {
    fn absorb(&mut self, other: &SearchStats) {
        self.prefixes_expanded += other.prefixes_expanded;
        self.solver_calls += other.solver_calls;
        self.max_queue = self.max_queue.max(other.max_queue);
        self.wall_seconds += other.wall_seconds;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid environment: {0}")]
    Environment(#[from] GeometryError),
    #[error("invalid boundary conditions: {0}")]
    Boundary(String),
    #[error("no feasible vertex sequence found after expanding {} prefixes", stats.prefixes_expanded)]
    NoFeasibleSequence { stats: SearchStats },
    #[error("prefix queue exceeded {cap} entries")]
    QueueOverflow { cap: usize, stats: SearchStats },
}

impl PlanError {
    pub fn stats(&self) -> Option<&SearchStats> {
        match self {
            PlanError::NoFeasibleSequence { stats } | PlanError::QueueOverflow { stats, .. } => Some(stats),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrefixStatus {
    /// Not yet solved (initial singles and deferred extensions).
    Unchecked,
    /// Solved and feasible up to its last junction.
    FeasiblePrefix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    pub sequence: Vec<usize>,
    pub distance: f64,
    pub solution: Option<ChainSolution>,
    pub status: PrefixStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub mode: PlanMode,
    pub sequence: Vec<usize>,
    pub trajectory: Trajectory,
    pub cost: f64,
    pub distance: f64,
    pub solution: ChainSolution,
    pub stats: SearchStats,
    pub queue: QueueTrace,
}

/// Queue behaviour of the distance search.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QueueTrace {
    /// Keys of the popped prefixes, in pop order.
    pub pops: Vec<f64>,
    /// Smallest key among the prefixes left unexpanded (infinite if none).
    pub frontier: f64,
}

/// Straight-line length of the chain through `sequence`.
pub fn sequence_distance(env: &PolygonEnvironment, bc: &BoundaryConditions, sequence: &[usize]) -> f64 {
    let mut prev = bc.p0;
    let mut total = 0.0;
    for &v in sequence {
        let c = env.vertex(v);
        total += (c - prev).norm();
        prev = c;
    }
    total + (bc.pf - prev).norm()
}

/// Solves the chain for `sequence`, warm-starting from the solution of
/// `sequence` minus its last vertex when given. Falls back to a cold start
/// if the warm start does not converge.
pub fn solve_extension(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    sequence: &[usize],
    parent: Option<&ChainSolution>,
    options: &SolverOptions,
) -> Result<ChainSolution, SolverError> {
    let problem = ChainProblem::from_vertices(env, *bc, sequence)?;
    let warm = parent
        .filter(|p| p.converged && p.times.len() + 1 == sequence.len())
        .map(|p| solve_chain_from(&problem, &warm_start_times(p, &problem), options));
    match warm {
        Some(Ok(sol)) if sol.converged => Ok(sol),
        Some(warm) => match solve_chain(&problem, options) {
            Ok(cold) if cold.converged => Ok(cold),
            cold => warm.or(cold),
        },
        None => solve_chain(&problem, options),
    }
}

/// Solves `sequence` along the same warm-start path the planner uses:
/// each prefix is solved from the converged solution of the one before it.
pub fn solve_sequence(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    sequence: &[usize],
    options: &SolverOptions,
) -> Result<ChainSolution, SolverError> {
    if sequence.len() <= 1 {
        return solve_extension(env, bc, sequence, None, options);
    }
    let mut current = solve_extension(env, bc, &sequence[..1], None, options)?;
    for n in 2..=sequence.len() {
        current = solve_extension(env, bc, &sequence[..n], Some(&current), options)?;
    }
    Ok(current)
}

/// Heap entry: minimum key first, then shorter sequences, then lexicographic.
struct Entry {
    key: f64,
    prefix: Prefix,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so that BinaryHeap pops the smallest entry.
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.prefix.sequence.len().cmp(&self.prefix.sequence.len()))
            .then_with(|| other.prefix.sequence.cmp(&self.prefix.sequence))
    }
}

/// Search state shared by the distance and energy phases.
struct Search<'a> {
    env: &'a PolygonEnvironment,
    bc: BoundaryConditions,
    config: PlannerConfig,
    seen: HashSet<Vec<usize>>,
    stats: SearchStats,
}

impl<'a> Search<'a> {
    fn solve(&mut self, sequence: &[usize], parent: Option<&ChainSolution>) -> Option<ChainSolution> {
        self.stats.solver_calls += 1;
        solve_extension(self.env, &self.bc, sequence, parent, &self.config.solver).ok()
    }

    fn fully_feasible(&self, sol: &ChainSolution) -> bool {
        trajectory_feasible(self.env, sol).is_ok()
    }

    /// Extensions of `parent` by every unused vertex that has not been queued
    /// before. Each is solved and kept only if feasible up to its last
    /// junction; extensions failing `solve_if` are returned unsolved.
    fn extensions(&mut self, parent: &Prefix, solve_if: impl Fn(&Prefix) -> bool) -> Vec<Prefix> {
        let used: HashSet<usize> = parent.sequence.iter().copied().collect();
        let mut fresh = Vec::new();
        for k in 0..self.env.vertex_count() {
            if used.contains(&k) {
                continue;
            }
            let mut sequence = parent.sequence.clone();
            sequence.push(k);
            if !self.seen.insert(sequence.clone()) {
                continue;
            }
            let distance = sequence_distance(self.env, &self.bc, &sequence);
            fresh.push(Prefix { sequence, distance, solution: None, status: PrefixStatus::Unchecked });
        }

        let (to_solve, deferred): (Vec<Prefix>, Vec<Prefix>) = fresh.into_iter().partition(|p| solve_if(p));
        self.stats.solver_calls += to_solve.len();
        let env = self.env;
        let bc = self.bc;
        let options = self.config.solver;
        let parent_solution = parent.solution.as_ref();
        let solve_one = |mut child: Prefix| -> Option<Prefix> {
            let sol = solve_extension(env, &bc, &child.sequence, parent_solution, &options).ok()?;
            prefix_feasible(env, &sol, child.sequence.len()).ok()?;
            child.solution = Some(sol);
            child.status = PrefixStatus::FeasiblePrefix;
            Some(child)
        };
        // Results are collected in input order, so threading does not change the outcome.
        let solved: Vec<Option<Prefix>> = if self.config.parallel {
            to_solve.into_par_iter().map(solve_one).collect()
        } else {
            to_solve.into_iter().map(solve_one).collect()
        };
        solved.into_iter().flatten().chain(deferred).collect()
    }

    fn push(&mut self, heap: &mut BinaryHeap<Entry>, key: f64, prefix: Prefix) -> Result<(), PlanError> {
        heap.push(Entry { key, prefix });
        self.stats.max_queue = self.stats.max_queue.max(heap.len());
        if heap.len() > self.config.queue_cap {
            return Err(PlanError::QueueOverflow { cap: self.config.queue_cap, stats: self.stats });
        }
        Ok(())
    }
}

/// Incumbent of the distance phase plus the prefixes it left unexpanded.
struct DistancePhase {
    best: Option<(Prefix, ChainSolution)>,
    queue: Vec<Prefix>,
    trace: QueueTrace,
}

fn distance_phase(search: &mut Search, keep_deferred: bool) -> Result<DistancePhase, PlanError> {
    let mut heap = BinaryHeap::new();
    let empty = Prefix {
        sequence: Vec::new(),
        distance: sequence_distance(search.env, &search.bc, &[]),
        solution: None,
        status: PrefixStatus::Unchecked,
    };
    search.seen.insert(Vec::new());
    search.push(&mut heap, empty.distance, empty)?;
    for k in 0..search.env.vertex_count() {
        let sequence = vec![k];
        search.seen.insert(sequence.clone());
        let distance = sequence_distance(search.env, &search.bc, &sequence);
        let single = Prefix { sequence, distance, solution: None, status: PrefixStatus::Unchecked };
        search.push(&mut heap, distance, single)?;
    }

    let mut best: Option<(Prefix, ChainSolution)> = None;
    let mut d_s = f64::INFINITY;
    let mut trace = QueueTrace { pops: Vec::new(), frontier: f64::INFINITY };
    while heap.peek().is_some_and(|top| top.key < d_s) {
        let Entry { key, mut prefix } = heap.pop().expect("peeked");
        trace.pops.push(key);
        search.stats.prefixes_expanded += 1;
        if prefix.solution.is_none() {
            prefix.solution = search.solve(&prefix.sequence, None);
        }
        if let Some(sol) = &prefix.solution {
            if search.fully_feasible(sol) {
                d_s = prefix.distance;
                best = Some((prefix.clone(), sol.clone()));
            }
        }
        // Extensions keyed at or beyond the incumbent are never popped here;
        // they are kept unsolved only for the energy phase.
        let children = search.extensions(&prefix, |child| child.distance < d_s);
        for child in children {
            if child.status == PrefixStatus::Unchecked && !keep_deferred {
                trace.frontier = trace.frontier.min(child.distance);
                continue;
            }
            search.push(&mut heap, child.distance, child)?;
        }
    }
    if let Some(top) = heap.peek() {
        trace.frontier = trace.frontier.min(top.key);
    }
    Ok(DistancePhase { best, queue: heap.into_vec().into_iter().map(|e| e.prefix).collect(), trace })
}

fn finish(
    mode: PlanMode,
    prefix: Prefix,
    solution: ChainSolution,
    stats: SearchStats,
    queue: QueueTrace,
) -> PlanResult {
    PlanResult {
        mode,
        sequence: prefix.sequence,
        trajectory: solution.trajectory.clone(),
        cost: solution.cost,
        distance: prefix.distance,
        solution,
        stats,
        queue,
    }
}

fn prepare(env: &PolygonEnvironment, bc: &BoundaryConditions) -> Result<PolygonEnvironment, PlanError> {
    if !(bc.t0.is_finite() && bc.tf.is_finite() && bc.tf > bc.t0) {
        return Err(PlanError::Boundary(format!("horizon [{}, {}] is empty", bc.t0, bc.tf)));
    }
    for (name, p) in [("start", bc.p0), ("goal", bc.pf), ("v0", bc.v0), ("vf", bc.vf)] {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(PlanError::Boundary(format!("{name} is not finite")));
        }
    }
    let inflated = env.inflate(bc.radius)?;
    for (name, p) in [("start", bc.p0), ("goal", bc.pf)] {
        if !inflated.point_free(&p) {
            return Err(PlanError::Boundary(format!("{name} ({}, {}) is not in free space", p.x, p.y)));
        }
    }
    Ok(inflated)
}

/// Minimum-distance feasible sequence. Obstacles are inflated by `bc.radius`.
pub fn plan_min_distance(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    config: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    let start = Instant::now();
    let env = prepare(env, bc)?;
    let mut search =
        Search { env: &env, bc: *bc, config: *config, seen: HashSet::new(), stats: SearchStats::default() };
    let phase = distance_phase(&mut search, false)?;
    search.stats.wall_seconds = start.elapsed().as_secs_f64();
    let (prefix, sol) = phase.best.ok_or(PlanError::NoFeasibleSequence { stats: search.stats })?;
    Ok(finish(PlanMode::Distance, prefix, sol, search.stats, phase.trace))
}

/// Minimum-distance search followed by the energy refinement.
pub fn plan_min_energy(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    config: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    let start = Instant::now();
    let env = prepare(env, bc)?;
    let mut search =
        Search { env: &env, bc: *bc, config: *config, seen: HashSet::new(), stats: SearchStats::default() };
    let phase = distance_phase(&mut search, true)?;
    let (prefix, sol) = phase.best.ok_or(PlanError::NoFeasibleSequence { stats: search.stats })?;
    let (prefix, sol) = refine(&mut search, (prefix, sol), phase.queue)?;
    search.stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(finish(PlanMode::Energy, prefix, sol, search.stats, phase.trace))
}

/// Best-first search by chain energy against the incumbent's energy.
fn refine(
    search: &mut Search,
    incumbent: (Prefix, ChainSolution),
    survivors: Vec<Prefix>,
) -> Result<(Prefix, ChainSolution), PlanError> {
    let mut best = incumbent;
    let mut heap = BinaryHeap::new();
    // Re-solve survivors in a fixed order so the result is independent of heap layout.
    let mut survivors = survivors;
    survivors.sort_by(|a, b| a.sequence.cmp(&b.sequence));
    for mut prefix in survivors {
        if prefix.solution.is_none() {
            search.stats.solver_calls += prefix.sequence.len().max(1);
            prefix.solution = solve_sequence(search.env, &search.bc, &prefix.sequence, &search.config.solver).ok();
            let ok = prefix.solution.as_ref().is_some_and(|s| {
                prefix.sequence.len() <= 1 || prefix_feasible(search.env, s, prefix.sequence.len()).is_ok()
            });
            if !ok {
                continue;
            }
        }
        let Some(cost) = prefix.solution.as_ref().filter(|s| s.converged).map(|s| s.cost) else { continue };
        if cost <= best.1.cost {
            search.push(&mut heap, cost, prefix)?;
        }
    }

    while heap.peek().is_some_and(|top| top.key < best.1.cost) {
        let Entry { prefix, .. } = heap.pop().expect("peeked");
        search.stats.prefixes_expanded += 1;
        let sol = prefix.solution.as_ref().expect("energy queue holds solved prefixes");
        if sol.cost < best.1.cost && search.fully_feasible(sol) {
            best = (prefix.clone(), sol.clone());
        }
        let bound = best.1.cost;
        for child in search.extensions(&prefix, |_| true) {
            let Some(cost) = child.solution.as_ref().map(|s| s.cost) else { continue };
            if cost < bound {
                search.push(&mut heap, cost, child)?;
            }
        }
    }
    Ok(best)
}

/// Runs the distance search backwards from the goal and reverses the result.
pub fn plan_suffix(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    config: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    let reversed = plan_min_distance(env, &bc.reversed(), config)?;
    let mut sequence = reversed.sequence.clone();
    sequence.reverse();
    let trajectory = reversed.trajectory.time_reversed();
    let mut solution = reversed.solution;
    solution.sequence = sequence.clone();
    solution.times = trajectory.junctions.iter().map(|j| j.time).collect();
    solution.trajectory = trajectory.clone();
    solution.trace.clear();
    Ok(PlanResult {
        mode: PlanMode::Suffix,
        sequence,
        trajectory,
        cost: reversed.cost,
        distance: reversed.distance,
        solution,
        stats: reversed.stats,
        queue: reversed.queue,
    })
}

/// Dispatches on `config.mode`.
pub fn plan(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    config: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    match config.mode {
        PlanMode::Distance => plan_min_distance(env, bc, config),
        PlanMode::Energy => plan_min_energy(env, bc, config),
        PlanMode::Suffix => plan_suffix(env, bc, config),
    }
}

/// Combined statistics of several runs.
pub fn merge_stats<'a>(runs: impl IntoIterator<Item = &'a SearchStats>) -> SearchStats {
    let mut total = SearchStats::default();
    for s in runs {
        total.absorb(s);
    }
    total
}
