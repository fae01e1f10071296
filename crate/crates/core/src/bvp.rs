//! Optimal chained trajectories through a fixed sequence of contact points.
//!
//! For fixed junction times the arc coefficients follow from one square
//! linear system: boundary position/velocity rows plus, per junction, the
//! contact rows `p⁻ = p⁺ = c` and the continuity rows `v⁻ = v⁺`, `u⁻ = u⁺`.
//! The junction times themselves are then chosen to zero the scalar residual
//! `(u̇⁻ − u̇⁺)·v` at every junction, which is also the derivative of the
//! energy with respect to that junction time.
//!
//! A junction at a reflex vertex must be passed at rest. There the continuity
//! rows are replaced by `v⁻ = 0` and `v⁺ = 0`, and the residual becomes the
//! jump of the Hamiltonian `−½‖u‖² + u̇·v`, i.e. `½(‖u⁺‖² − ‖u⁻‖²)`.
//!
//! All solves run on the horizon rescaled to `[0, 1]`; residuals are reported
//! in those normalized units.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Convexity, PolygonEnvironment, Vec2};
use crate::trajectory::{ArcState, CubicArc, Junction, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("junction times must be strictly increasing inside ({t0}, {tf})")]
    UnorderedTimes { t0: f64, tf: f64 },
    #[error("expected {expected} junction times, got {got}")]
    WrongTimeCount { expected: usize, got: usize },
    #[error("ill-conditioned system: normalized time gap {gap} is below {min_gap}")]
    Conditioning { gap: f64, min_gap: f64 },
    #[error("vertex {0} does not exist")]
    InvalidVertex(usize),
    #[error("sequence repeats vertex {0} immediately")]
    ImmediateRepeat(usize),
    #[error("invalid horizon [{t0}, {tf}]")]
    InvalidHorizon { t0: f64, tf: f64 },
}

/// Boundary states and horizon. `radius` is the robot radius; planners
/// inflate the obstacles by it and then treat the robot as a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub p0: Vec2,
    pub v0: Vec2,
    pub pf: Vec2,
    pub vf: Vec2,
    pub t0: f64,
    pub tf: f64,
    #[serde(default)]
    pub radius: f64,
}

impl BoundaryConditions {
    /// Rest-to-rest boundary conditions.
    pub fn rest_to_rest(p0: Vec2, pf: Vec2, t0: f64, tf: f64) -> Self {
        BoundaryConditions { p0, v0: Vec2::zeros(), pf, vf: Vec2::zeros(), t0, tf, radius: 0.0 }
    }

    pub fn horizon(&self) -> f64 {
        self.tf - self.t0
    }

    /// The same problem run backwards in time.
    pub fn reversed(&self) -> Self {
        BoundaryConditions { p0: self.pf, v0: -self.vf, pf: self.p0, vf: -self.v0, ..*self }
    }
}

/// A boundary value problem through an ordered list of contact points.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainProblem {
    pub bc: BoundaryConditions,
    /// Identifier of each contact (vertex index, or waypoint index).
    pub sequence: Vec<usize>,
    pub points: Vec<Vec2>,
    /// Contacts that must be passed at rest (reflex vertices).
    pub stops: Vec<bool>,
}

impl ChainProblem {
    /// Chain through environment vertices; reflex vertices become stops.
    pub fn from_vertices(
        env: &PolygonEnvironment,
        bc: BoundaryConditions,
        sequence: &[usize],
    ) -> Result<Self, SolverError> {
        for (i, &v) in sequence.iter().enumerate() {
            if v >= env.vertex_count() {
                return Err(SolverError::InvalidVertex(v));
            }
            if i > 0 && sequence[i - 1] == v {
                return Err(SolverError::ImmediateRepeat(v));
            }
        }
        Ok(ChainProblem {
            bc,
            sequence: sequence.to_vec(),
            points: sequence.iter().map(|&v| env.vertex(v)).collect(),
            stops: sequence.iter().map(|&v| env.vertex_convexity(v) == Convexity::Reflex).collect(),
        })
    }

    /// Chain through free waypoints (none of them a stop).
    pub fn from_waypoints(bc: BoundaryConditions, points: &[Vec2]) -> Self {
        ChainProblem {
            bc,
            sequence: (0..points.len()).collect(),
            points: points.to_vec(),
            stops: vec![false; points.len()],
        }
    }

    pub fn junction_count(&self) -> usize {
        self.points.len()
    }

    /// Straight-line length `p⁰ → c₁ → … → c_n → p^f`.
    pub fn chain_length(&self) -> f64 {
        let mut prev = self.bc.p0;
        let mut total = 0.0;
        for p in self.points.iter().chain(std::iter::once(&self.bc.pf)) {
            total += (p - prev).norm();
            prev = *p;
        }
        total
    }

    fn to_normalized(&self, t: f64) -> f64 {
        (t - self.bc.t0) / self.bc.horizon()
    }

    fn to_absolute(&self, s: f64) -> f64 {
        self.bc.t0 + s * self.bc.horizon()
    }

    fn check_horizon(&self) -> Result<(), SolverError> {
        let (t0, tf) = (self.bc.t0, self.bc.tf);
        if !(t0.is_finite() && tf.is_finite() && tf > t0) {
            return Err(SolverError::InvalidHorizon { t0, tf });
        }
        Ok(())
    }

    fn normalize_times(&self, times: &[f64]) -> Result<Vec<f64>, SolverError> {
        self.check_horizon()?;
        if times.len() != self.junction_count() {
            return Err(SolverError::WrongTimeCount { expected: self.junction_count(), got: times.len() });
        }
        let mut prev = self.bc.t0;
        for &t in times {
            if !(t > prev) {
                return Err(SolverError::UnorderedTimes { t0: self.bc.t0, tf: self.bc.tf });
            }
            prev = t;
        }
        if !(self.bc.tf > prev) {
            return Err(SolverError::UnorderedTimes { t0: self.bc.t0, tf: self.bc.tf });
        }
        Ok(times.iter().map(|&t| self.to_normalized(t)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Convergence threshold on `‖r‖∞`, relative to `max(1, normalized energy)`.
    pub residual_tol: f64,
    /// Minimum normalized gap between consecutive junction times.
    pub min_separation: f64,
    /// Record one trace entry per Newton iteration.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 50, residual_tol: 1e-9, min_separation: 1e-6, trace: false }
    }
}

/// One Newton iteration, as emitted in solver traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub times: Vec<f64>,
    pub residual_norm: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSolution {
    pub sequence: Vec<usize>,
    /// Absolute junction times.
    pub times: Vec<f64>,
    pub trajectory: Trajectory,
    /// `½∫‖u‖²dt` of the trajectory in absolute time.
    pub cost: f64,
    /// `‖r‖∞` in normalized units.
    pub max_residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
}

impl ChainSolution {
    pub fn arcs(&self) -> &[CubicArc] {
        &self.trajectory.arcs
    }
}

type Coeffs = Vec<[Vec2; 4]>;

// Rows in descending power order [t³, t², t, 1].
fn pos_row(s: f64) -> [f64; 4] {
    [s * s * s, s * s, s, 1.0]
}

fn vel_row(s: f64) -> [f64; 4] {
    [3.0 * s * s, 2.0 * s, 1.0, 0.0]
}

fn acc_row(s: f64) -> [f64; 4] {
    [6.0 * s, 2.0, 0.0, 0.0]
}

struct Normalized<'a> {
    problem: &'a ChainProblem,
    v0: Vec2,
    vf: Vec2,
}

impl<'a> Normalized<'a> {
    fn new(problem: &'a ChainProblem) -> Self {
        let h = problem.bc.horizon();
        Normalized { problem, v0: problem.bc.v0 * h, vf: problem.bc.vf * h }
    }

    /// Per-axis system (identical for x and y) and its two right-hand sides.
    /// With `local`, arc `j` is expanded in `s − s_{j−1}` instead of `s`, which
    /// avoids cancellation when the coefficients are large.
    fn axis_system(&self, s: &[f64], local: bool) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = s.len();
        let origin = |arc: usize| if local { Self::bounds(s, arc).0 } else { 0.0 };
        let size = 4 * (n + 1);
        let mut a = DMatrix::zeros(size, size);
        let mut z = DMatrix::zeros(size, 2);
        let mut row = 0;
        let put = |a: &mut DMatrix<f64>, row: usize, arc: usize, vals: [f64; 4], sign: f64| {
            for (k, v) in vals.iter().enumerate() {
                a[(row, 4 * arc + k)] += sign * v;
            }
        };
        let rhs = |z: &mut DMatrix<f64>, row: usize, v: Vec2| {
            z[(row, 0)] = v.x;
            z[(row, 1)] = v.y;
        };

        put(&mut a, row, 0, pos_row(0.0), 1.0);
        rhs(&mut z, row, self.problem.bc.p0);
        row += 1;
        put(&mut a, row, 0, vel_row(0.0), 1.0);
        rhs(&mut z, row, self.v0);
        row += 1;

        for (i, &si) in s.iter().enumerate() {
            let c = self.problem.points[i];
            put(&mut a, row, i, pos_row(si - origin(i)), 1.0);
            rhs(&mut z, row, c);
            row += 1;
            put(&mut a, row, i + 1, pos_row(si - origin(i + 1)), 1.0);
            rhs(&mut z, row, c);
            row += 1;
            if self.problem.stops[i] {
                put(&mut a, row, i, vel_row(si - origin(i)), 1.0);
                row += 1;
                put(&mut a, row, i + 1, vel_row(si - origin(i + 1)), 1.0);
                row += 1;
            } else {
                put(&mut a, row, i, vel_row(si - origin(i)), 1.0);
                put(&mut a, row, i + 1, vel_row(si - origin(i + 1)), -1.0);
                row += 1;
                put(&mut a, row, i, acc_row(si - origin(i)), 1.0);
                put(&mut a, row, i + 1, acc_row(si - origin(i + 1)), -1.0);
                row += 1;
            }
        }

        put(&mut a, row, n, pos_row(1.0 - origin(n)), 1.0);
        rhs(&mut z, row, self.problem.bc.pf);
        row += 1;
        put(&mut a, row, n, vel_row(1.0 - origin(n)), 1.0);
        rhs(&mut z, row, self.vf);
        row += 1;
        debug_assert_eq!(row, size);
        (a, z)
    }

    fn check_gaps(&self, s: &[f64], min_gap: f64) -> Result<(), SolverError> {
        let mut prev = 0.0;
        for &x in s.iter().chain(std::iter::once(&1.0)) {
            let gap = x - prev;
            if !(gap >= min_gap) {
                return Err(SolverError::Conditioning { gap, min_gap });
            }
            prev = x;
        }
        Ok(())
    }

    /// Arc coefficients in normalized time local to each arc start, index = power.
    fn coefficients(&self, s: &[f64], min_gap: f64) -> Result<Coeffs, SolverError> {
        self.check_gaps(s, min_gap)?;
        let (a, z) = self.axis_system(s, true);
        let gap = s
            .iter()
            .chain(std::iter::once(&1.0))
            .scan(0.0, |prev, &x| {
                let g = x - *prev;
                *prev = x;
                Some(g)
            })
            .fold(f64::INFINITY, f64::min);
        let sol = a.clone().lu().solve(&z).ok_or(SolverError::Conditioning { gap, min_gap })?;
        let resid = (&a * &sol - &z).amax();
        if !(resid <= 1e-8 * z.amax().max(1.0)) {
            return Err(SolverError::Conditioning { gap, min_gap });
        }
        Ok((0..=s.len())
            .map(|j| {
                let c = |k: usize| Vec2::new(sol[(4 * j + k, 0)], sol[(4 * j + k, 1)]);
                [c(3), c(2), c(1), c(0)]
            })
            .collect())
    }

    fn bounds(s: &[f64], j: usize) -> (f64, f64) {
        let start = if j == 0 { 0.0 } else { s[j - 1] };
        let end = if j == s.len() { 1.0 } else { s[j] };
        (start, end)
    }

    fn energy(s: &[f64], coeffs: &Coeffs) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let (a, b) = Self::bounds(s, j);
                CubicArc { coeffs: *c, t_start: 0.0, t_end: b - a }.energy()
            })
            .sum()
    }

    fn residuals(&self, s: &[f64], coeffs: &Coeffs) -> Vec<f64> {
        s.iter()
            .enumerate()
            .map(|(i, &si)| {
                let left = state(&coeffs[i], si - Self::bounds(s, i).0);
                let right = state(&coeffs[i + 1], 0.0);
                if self.problem.stops[i] {
                    0.5 * (right.u.norm_squared() - left.u.norm_squared())
                } else {
                    let v = (left.v + right.v) * 0.5;
                    (left.jerk - right.jerk).dot(&v)
                }
            })
            .collect()
    }

    /// Energy and residuals at normalized times `s`.
    fn evaluate(&self, s: &[f64], min_gap: f64) -> Result<(f64, Vec<f64>), SolverError> {
        let coeffs = self.coefficients(s, min_gap)?;
        Ok((Self::energy(s, &coeffs), self.residuals(s, &coeffs)))
    }
}

fn state(c: &[Vec2; 4], t: f64) -> ArcState {
    CubicArc { coeffs: *c, t_start: t, t_end: t }.eval_unchecked(t)
}

/// Assembles the full `8(n+1)` system `A c = z` at absolute junction times.
///
/// Unknowns are stacked per arc as `[a₃ˣ, a₃ʸ, a₂ˣ, a₂ʸ, a₁ˣ, a₁ʸ, a₀ˣ, a₀ʸ]` in
/// normalized time `s = (t − t⁰)/(t^f − t⁰)`; boundary velocities in `z` are
/// scaled by the horizon accordingly.
pub fn assemble_linear_system(
    problem: &ChainProblem,
    times: &[f64],
) -> Result<(DMatrix<f64>, DVector<f64>), SolverError> {
    let s = problem.normalize_times(times)?;
    let norm = Normalized::new(problem);
    let (a, z) = norm.axis_system(&s, false);
    let size = a.nrows();
    let mut full = DMatrix::zeros(2 * size, 2 * size);
    let mut rhs = DVector::zeros(2 * size);
    for r in 0..size {
        for c in 0..size {
            // Axis columns are (arc, power descending); interleave the axes.
            let (arc, k) = (c / 4, c % 4);
            let col = 8 * arc + 2 * k;
            for axis in 0..2 {
                full[(2 * r + axis, col + axis)] = a[(r, c)];
            }
        }
        rhs[2 * r] = z[(r, 0)];
        rhs[2 * r + 1] = z[(r, 1)];
    }
    Ok((full, rhs))
}

fn denormalize(problem: &ChainProblem, s: &[f64], coeffs: &Coeffs) -> Trajectory {
    let h = problem.bc.horizon();
    let arcs = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let (a, b) = Normalized::bounds(s, j);
            // p(t) = P((t − t_a)/h) with t_a the arc start: rescale, then shift to absolute time.
            let scaled = [c[0], c[1] / h, c[2] / (h * h), c[3] / (h * h * h)];
            let start = problem.to_absolute(a);
            let end = if j == s.len() { problem.bc.tf } else { problem.to_absolute(b) };
            CubicArc { coeffs: crate::trajectory::taylor_shift(&scaled, -start), t_start: start, t_end: end }
        })
        .collect();
    let junctions = problem
        .sequence
        .iter()
        .zip(s)
        .map(|(&vertex, &si)| Junction { vertex, time: problem.to_absolute(si) })
        .collect();
    Trajectory::new(arcs, junctions)
}

/// Arc coefficients (absolute time) for fixed junction times.
pub fn solve_coefficients(problem: &ChainProblem, times: &[f64]) -> Result<Vec<CubicArc>, SolverError> {
    let s = problem.normalize_times(times)?;
    let norm = Normalized::new(problem);
    let coeffs = norm.coefficients(&s, SolverOptions::default().min_separation)?;
    Ok(denormalize(problem, &s, &coeffs).arcs)
}

/// Junction residuals (normalized units) for fixed junction times.
pub fn junction_residuals(problem: &ChainProblem, times: &[f64]) -> Result<Vec<f64>, SolverError> {
    let s = problem.normalize_times(times)?;
    let norm = Normalized::new(problem);
    let coeffs = norm.coefficients(&s, SolverOptions::default().min_separation)?;
    Ok(norm.residuals(&s, &coeffs))
}

/// Energy (absolute units) of the chain with fixed junction times.
pub fn chain_energy(problem: &ChainProblem, times: &[f64]) -> Result<f64, SolverError> {
    let arcs = solve_coefficients(problem, times)?;
    Ok(arcs.iter().map(CubicArc::energy).sum())
}

/// Junction times proportional to cumulative straight-line distance along the chain.
pub fn distance_proportional_times(problem: &ChainProblem) -> Vec<f64> {
    let n = problem.junction_count();
    let total = problem.chain_length();
    let mut prev = problem.bc.p0;
    let mut acc = 0.0;
    let s: Vec<f64> = problem
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            acc += (p - prev).norm();
            prev = *p;
            if total > 0.0 {
                acc / total
            } else {
                (i + 1) as f64 / (n + 1) as f64
            }
        })
        .collect();
    s.into_iter().map(|x| problem.to_absolute(x)).collect()
}

/// Initial times for a chain that extends `parent` by one trailing contact:
/// the parent's converged times plus a distance-proportional slot for the new one.
pub fn warm_start_times(parent: &ChainSolution, problem: &ChainProblem) -> Vec<f64> {
    let n = problem.junction_count();
    if n == 0 || parent.times.len() + 1 != n {
        return distance_proportional_times(problem);
    }
    let last_time = parent.times.last().copied().unwrap_or(problem.bc.t0);
    let last_point = if n >= 2 { problem.points[n - 2] } else { problem.bc.p0 };
    let new_point = problem.points[n - 1];
    let a = (new_point - last_point).norm();
    let b = (problem.bc.pf - new_point).norm();
    let frac = if a + b > 0.0 { a / (a + b) } else { 0.5 };
    let mut times = parent.times.clone();
    times.push(last_time + (problem.bc.tf - last_time) * frac);
    times
}

/// Pushes times into `[ε, 1 − ε]` with consecutive gaps of at least `ε`.
fn project(s: &mut [f64], eps: f64) {
    let n = s.len();
    let mut lo = 0.0;
    for x in s.iter_mut() {
        *x = x.max(lo + eps);
        lo = *x;
    }
    let mut hi = 1.0;
    for i in (0..n).rev() {
        s[i] = s[i].min(hi - eps);
        hi = s[i];
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves the chain from distance-proportional initial times.
pub fn solve_chain(problem: &ChainProblem, options: &SolverOptions) -> Result<ChainSolution, SolverError> {
    let init = distance_proportional_times(problem);
    solve_chain_from(problem, &init, options)
}

/// Damped Newton on the junction residuals starting from `initial` (absolute times).
///
/// The residual is the gradient of the normalized energy with respect to the
/// normalized junction times, so the energy serves as the line-search merit
/// and the central-difference Jacobian is its (symmetrized) Hessian.
/// Non-convergence is reported through `converged`, not as an error.
pub fn solve_chain_from(
    problem: &ChainProblem,
    initial: &[f64],
    options: &SolverOptions,
) -> Result<ChainSolution, SolverError> {
    problem.check_horizon()?;
    let n = problem.junction_count();
    if initial.len() != n {
        return Err(SolverError::WrongTimeCount { expected: n, got: initial.len() });
    }
    for (i, &v) in problem.sequence.iter().enumerate() {
        if i > 0 && problem.sequence[i - 1] == v {
            return Err(SolverError::ImmediateRepeat(v));
        }
    }
    let eps = options.min_separation;
    let norm = Normalized::new(problem);
    let mut s: Vec<f64> = initial.iter().map(|&t| problem.to_normalized(t)).collect();
    project(&mut s, eps);

    let (mut energy, mut r) = norm.evaluate(&s, eps)?;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let record = |trace: &mut Vec<TraceRecord>, it: usize, s: &[f64], r: &[f64], e: f64| {
        if options.trace {
            trace.push(TraceRecord {
                iteration: it,
                times: s.iter().map(|&x| problem.to_absolute(x)).collect(),
                residual_norm: inf_norm(r),
                energy: e,
            });
        }
    };
    record(&mut trace, 0, &s, &r, energy);

    // Polish well below the convergence threshold, and below the tolerance in
    // absolute terms too so high-energy chains still meet it residual-wise.
    let tight = |e: f64| (1e-3 * options.residual_tol * e.max(1.0)).min(0.1 * options.residual_tol);
    let loose = |e: f64| options.residual_tol * e.max(1.0);
    // Near the rounding floor the iterates wander; keep the best one seen.
    let mut best = (s.clone(), energy, r.clone());
    let mut stalled = 0;
    while n > 0 && iterations < options.max_iterations && inf_norm(&r) > tight(energy) {
        iterations += 1;
        let Some(hessian) = fd_hessian(&norm, &s, eps) else { break };
        let Some(step) = newton_step(&hessian, &r) else { break };
        let slope: f64 = step.iter().zip(&r).map(|(d, g)| d * g).sum();
        let r_norm = inf_norm(&r);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = s.iter().zip(&step).map(|(x, d)| x + alpha * d).collect();
            project(&mut trial, eps);
            if let Ok((e, rr)) = norm.evaluate(&trial, eps) {
                let armijo = e <= energy + 1e-4 * alpha * slope;
                let flat = e <= energy + 1e-12 * energy.abs().max(1.0) && inf_norm(&rr) < r_norm;
                if armijo || flat {
                    accepted = Some((trial, e, rr));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, e, rr)) = accepted else { break };
        s = trial;
        energy = e;
        r = rr;
        record(&mut trace, iterations, &s, &r, energy);
        if inf_norm(&r) < inf_norm(&best.2) {
            best = (s.clone(), energy, r.clone());
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 && inf_norm(&best.2) <= loose(best.1) {
                break;
            }
        }
    }
    if inf_norm(&best.2) < inf_norm(&r) {
        (s, energy, r) = best;
    }

    let coeffs = norm.coefficients(&s, eps)?;
    let trajectory = denormalize(problem, &s, &coeffs);
    let max_residual = inf_norm(&r);
    Ok(ChainSolution {
        sequence: problem.sequence.clone(),
        times: trajectory.junctions.iter().map(|j| j.time).collect(),
        cost: trajectory.energy(),
        converged: max_residual <= loose(energy),
        max_residual,
        iterations,
        trajectory,
        trace,
    })
}

/// Central-difference Jacobian of the residual map, symmetrized.
fn fd_hessian(norm: &Normalized, s: &[f64], eps: f64) -> Option<DMatrix<f64>> {
    let n = s.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let lo = if j == 0 { 0.0 } else { s[j - 1] };
        let hi = if j + 1 == n { 1.0 } else { s[j + 1] };
        let room = (s[j] - lo).min(hi - s[j]) - eps;
        let step = 1e-5f64.min(0.25 * room);
        if !(step > 0.0) {
            return None;
        }
        let mut plus = s.to_vec();
        plus[j] += step;
        let mut minus = s.to_vec();
        minus[j] -= step;
        let (_, rp) = norm.evaluate(&plus, eps * 0.5).ok()?;
        let (_, rm) = norm.evaluate(&minus, eps * 0.5).ok()?;
        for i in 0..n {
            h[(i, j)] = (rp[i] - rm[i]) / (2.0 * step);
        }
    }
    Some((&h + h.transpose()) * 0.5)
}

/// Newton direction with a Levenberg shift when the Hessian is not positive definite.
fn newton_step(hessian: &DMatrix<f64>, gradient: &[f64]) -> Option<Vec<f64>> {
    let n = gradient.len();
    let g = DVector::from_column_slice(gradient);
    let scale = hessian.diagonal().amax().max(1e-12);
    let mut shift = 0.0;
    for _ in 0..30 {
        let shifted = hessian + DMatrix::identity(n, n) * shift;
        if let Some(chol) = shifted.cholesky() {
            let d = chol.solve(&(-&g));
            if d.iter().all(|x| x.is_finite()) {
                return Some(d.iter().copied().collect());
            }
        }
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::hermite_arc;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    fn symmetric(vertex: Vec2) -> ChainProblem {
        let bc = BoundaryConditions::rest_to_rest(v(-1., 0.), v(1., 0.), 0.0, 2.0);
        ChainProblem::from_waypoints(bc, &[vertex])
    }

    #[test]
    fn system_sizes() {
        let bc = BoundaryConditions::rest_to_rest(v(0., 0.), v(3., 0.), 0.0, 3.0);
        for n in 0..3 {
            let pts: Vec<Vec2> = (0..n).map(|i| v(i as f64 + 1.0, 0.5)).collect();
            let p = ChainProblem::from_waypoints(bc, &pts);
            let times: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
            let (a, z) = assemble_linear_system(&p, &times).unwrap();
            assert_eq!(a.nrows(), 8 * (n + 1));
            assert_eq!(a.ncols(), 8 * (n + 1));
            assert_eq!(z.len(), 8 * (n + 1));
        }
    }

    #[test]
    fn full_system_matches_axis_solve() {
        let bc = BoundaryConditions {
            p0: v(0., 0.),
            v0: v(0.3, -0.1),
            pf: v(3., 1.),
            vf: v(0., 0.2),
            t0: 0.5,
            tf: 3.5,
            radius: 0.0,
        };
        let p = ChainProblem::from_waypoints(bc, &[v(1., 1.), v(2., -0.5)]);
        let times = [1.4, 2.6];
        let (a, z) = assemble_linear_system(&p, &times).unwrap();
        let c = a.lu().solve(&z).unwrap();
        let arcs = solve_coefficients(&p, &times).unwrap();
        // Compare at the second junction using the normalized stack.
        let s = (2.6 - 0.5) / 3.0;
        let arc1 = [v(c[8 + 6], c[8 + 7]), v(c[8 + 4], c[8 + 5]), v(c[8 + 2], c[8 + 3]), v(c[8], c[9])];
        let p_norm = state(&arc1, s).p;
        assert!((p_norm - arcs[1].position(2.6)).norm() < 1e-12);
        assert!((p_norm - v(2., -0.5)).norm() < 1e-12);
    }

    #[test]
    fn empty_sequence_is_hermite() {
        let bc = BoundaryConditions {
            p0: v(0., 1.),
            v0: v(1., 0.),
            pf: v(2., -1.),
            vf: v(0., 1.),
            t0: 1.0,
            tf: 3.0,
            radius: 0.0,
        };
        let p = ChainProblem::from_waypoints(bc, &[]);
        let arcs = solve_coefficients(&p, &[]).unwrap();
        let h = hermite_arc(bc.p0, bc.v0, bc.pf, bc.vf, bc.t0, bc.tf).unwrap();
        for k in 0..4 {
            assert!((arcs[0].coeffs[k] - h.coeffs[k]).norm() < 1e-11);
        }
        let sol = solve_chain(&p, &SolverOptions::default()).unwrap();
        assert!(sol.converged && sol.times.is_empty());
        assert!((sol.cost - h.energy()).abs() < 1e-12 * h.energy());
    }

    #[test]
    fn on_path_vertex_keeps_straight_cubic() {
        let p = symmetric(v(0., 0.));
        let arcs = solve_coefficients(&p, &[1.0]).unwrap();
        let straight = hermite_arc(v(-1., 0.), v(0., 0.), v(1., 0.), v(0., 0.), 0.0, 2.0).unwrap();
        for t in [0.0, 0.4, 1.0] {
            assert!((arcs[0].position(t) - straight.position(t)).norm() < 1e-12);
        }
        for t in [1.0, 1.5, 2.0] {
            assert!((arcs[1].position(t) - straight.position(t)).norm() < 1e-12);
        }
        let cost: f64 = arcs.iter().map(CubicArc::energy).sum();
        assert!((cost - 3.0).abs() < 1e-12);
        let r = junction_residuals(&p, &[1.0]).unwrap();
        assert!(r[0].abs() < 1e-12);
    }

    #[test]
    fn near_coincident_times_rejected() {
        let bc = BoundaryConditions::rest_to_rest(v(0., 0.), v(3., 0.), 0.0, 1.0);
        let p = ChainProblem::from_waypoints(bc, &[v(1., 1.), v(2., 1.)]);
        assert!(matches!(solve_coefficients(&p, &[0.5, 0.5 + 1e-9]), Err(SolverError::Conditioning { .. })));
        assert!(matches!(solve_coefficients(&p, &[0.6, 0.5]), Err(SolverError::UnorderedTimes { .. })));
    }

    #[test]
    fn empty_residual_vector() {
        let p = ChainProblem::from_waypoints(BoundaryConditions::rest_to_rest(v(0., 0.), v(1., 0.), 0.0, 1.0), &[]);
        assert!(junction_residuals(&p, &[]).unwrap().is_empty());
    }

    #[test]
    fn residual_changes_sign_at_symmetric_time() {
        let p = symmetric(v(0., 0.5));
        let before = junction_residuals(&p, &[0.9]).unwrap()[0];
        let after = junction_residuals(&p, &[1.1]).unwrap()[0];
        assert!(before * after < 0.0);
        assert!(junction_residuals(&p, &[1.0]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn residual_is_energy_gradient() {
        let bc = BoundaryConditions::rest_to_rest(v(0., 0.), v(4., 0.), 0.0, 1.0);
        let p = ChainProblem::from_waypoints(bc, &[v(1., 1.), v(3., -0.5)]);
        let times = [0.3, 0.7];
        let r = junction_residuals(&p, &times).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut plus = times;
            plus[i] += h;
            let mut minus = times;
            minus[i] -= h;
            let fd = (chain_energy(&p, &plus).unwrap() - chain_energy(&p, &minus).unwrap()) / (2.0 * h);
            assert!((fd - r[i]).abs() < 1e-5 * r[i].abs().max(1.0), "{fd} vs {}", r[i]);
        }
    }

    #[test]
    fn symmetric_junction_converges_to_midpoint() {
        let p = symmetric(v(0., 0.5));
        let sol = solve_chain(&p, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.times[0] - 1.0).abs() < 1e-6);
        assert!(sol.max_residual < 1e-9);
    }

    #[test]
    fn stop_junction_has_zero_velocity() {
        let bc = BoundaryConditions::rest_to_rest(v(0., 0.), v(2., 0.), 0.0, 2.0);
        let mut p = ChainProblem::from_waypoints(bc, &[v(1., 0.7)]);
        p.stops[0] = true;
        let sol = solve_chain(&p, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        let t = sol.times[0];
        let left = sol.arcs()[0].eval_unchecked(t);
        let right = sol.arcs()[1].eval_unchecked(t);
        assert!(left.v.norm() < 1e-10 && right.v.norm() < 1e-10);
        // Symmetric problem: stop at the midpoint of the horizon.
        assert!((t - 1.0).abs() < 1e-6);
        // Equal energies on both halves.
        assert!((sol.arcs()[0].energy() - sol.arcs()[1].energy()).abs() < 1e-9);
    }

    #[test]
    fn trace_records_iterations() {
        let p = symmetric(v(0.2, 0.5));
        let sol = solve_chain(&p, &SolverOptions { trace: true, ..Default::default() }).unwrap();
        assert_eq!(sol.trace.len(), sol.iterations + 1);
        assert!(sol.trace.last().unwrap().residual_norm <= sol.trace[0].residual_norm);
    }

    #[test]
    fn reversed_boundary_conditions() {
        let bc = BoundaryConditions {
            p0: v(0., 0.),
            v0: v(1., 0.),
            pf: v(1., 1.),
            vf: v(0., 2.),
            t0: 0.0,
            tf: 1.0,
            radius: 0.0,
        };
        let r = bc.reversed();
        assert_eq!(r.p0, bc.pf);
        assert_eq!(r.v0, -bc.vf);
        assert_eq!(r.vf, -bc.v0);
    }
}
