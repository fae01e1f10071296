//! Analytical collision checks for cubic arcs against polygon faces.
//!
//! An arc meets the line of face `k` where `(p(t) − c₂) × (c₂ − c₁) = 0`,
//! a cubic in `t`. Its real roots inside the arc interval, together with the
//! edge parameter `λ` (`p = (1 − λ)c₁ + λc₂`), locate every contact with the
//! closed face: `λ ∈ (0, 1)` pierces the face, `λ ∈ {0, 1}` touches a vertex.

use serde::Serialize;

use crate::bvp::ChainSolution;
use crate::geometry::{cross, Convexity, PolygonEnvironment, Vec2};
use crate::roots::{cubic_roots, RootError};
use crate::trajectory::{CubicArc, Junction};

/// Velocity tolerance for contact legality (m/s).
pub const VELOCITY_TOL: f64 = 1e-6;
/// Slack on the edge parameter before a root is discarded.
pub const LAMBDA_TOL: f64 = 1e-9;
/// Roots closer than this (seconds) are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-9;
/// Events on faces incident to a junction vertex within this fraction of the
/// arc duration from the junction time belong to the junction itself.
const JUNCTION_WINDOW: f64 = 1e-6;
/// Slack on the normalized arc parameter when keeping end-of-interval roots.
const INTERVAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    InteriorCrossing,
    VertexContactStart,
    VertexContactEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub face: usize,
    pub lambda: f64,
    pub kind: CrossingKind,
}

/// The arc runs along the face's supporting line for its whole interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateOverlap;

/// Times and edge parameters where `arc` meets the closed segment `c1`–`c2`.
pub fn edge_crossings(arc: &CubicArc, c1: &Vec2, c2: &Vec2) -> Result<Vec<(f64, f64)>, DegenerateOverlap> {
    let e = c2 - c1;
    let h = arc.duration();
    let local = arc.local_coeffs();
    // Local time τ = h·x with x ∈ [0, 1] keeps the coefficients comparable.
    let mut scaled = local;
    let mut pow = 1.0;
    for c in scaled.iter_mut().skip(1) {
        pow *= h;
        *c *= pow;
    }
    let base = scaled[0] - c2;
    let k = [cross(&base, &e), cross(&scaled[1], &e), cross(&scaled[2], &e), cross(&scaled[3], &e)];
    let scale = e.norm() * scaled.iter().skip(1).map(|c| c.norm()).fold(base.norm(), f64::max);
    let xs = match cubic_roots(&k, scale) {
        Ok(xs) => xs,
        Err(RootError::Degenerate) => return Err(DegenerateOverlap),
    };

    let axis = if e.x.abs() >= e.y.abs() { 0 } else { 1 };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for x in xs {
        if !(-INTERVAL_TOL..=1.0 + INTERVAL_TOL).contains(&x) {
            continue;
        }
        let x = x.clamp(0.0, 1.0);
        let t = if x == 1.0 { arc.t_end } else { arc.t_start + h * x };
        let p = scaled[0] + (scaled[1] + (scaled[2] + scaled[3] * x) * x) * x;
        let lambda = (p[axis] - c1[axis]) / e[axis];
        if !(-LAMBDA_TOL..=1.0 + LAMBDA_TOL).contains(&lambda) {
            continue;
        }
        let lambda = if lambda <= LAMBDA_TOL {
            0.0
        } else if lambda >= 1.0 - LAMBDA_TOL {
            1.0
        } else {
            lambda
        };
        if out.last().is_some_and(|&(prev, _)| t - prev <= ROOT_MERGE_TOL) {
            continue;
        }
        out.push((t, lambda));
    }
    Ok(out)
}

/// Contacts of `arc` with face `k`, classified by edge parameter.
pub fn crossing_times(
    arc: &CubicArc,
    env: &PolygonEnvironment,
    k: usize,
) -> Result<Vec<CrossingEvent>, DegenerateOverlap> {
    let f = env.face(k);
    let hits = edge_crossings(arc, &env.vertex(f.start), &env.vertex(f.end))?;
    Ok(hits
        .into_iter()
        .map(|(time, lambda)| CrossingEvent {
            time,
            face: k,
            lambda,
            kind: if lambda == 0.0 {
                CrossingKind::VertexContactStart
            } else if lambda == 1.0 {
                CrossingKind::VertexContactEnd
            } else {
                CrossingKind::InteriorCrossing
            },
        })
        .collect())
}

/// Whether touching vertex `i` with velocity `v` keeps the robot out of the obstacle.
///
/// At a convex corner the robot may not move into both incident half-planes
/// at once; at a reflex corner it must be at rest.
pub fn vertex_contact_legal(env: &PolygonEnvironment, i: usize, v: &Vec2) -> bool {
    match env.vertex_convexity(i) {
        Convexity::Convex => {
            let (n1, n2) = env.vertex_normals(i);
            v.dot(&n1) >= -VELOCITY_TOL || v.dot(&n2) >= -VELOCITY_TOL
        }
        Convexity::Reflex => v.norm() <= VELOCITY_TOL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// The arc passes through the interior of a face.
    Crossing,
    /// The arc touches a vertex that is not one of its junctions.
    UnexpectedContact,
    /// A junction's velocity points into the obstacle.
    IllegalContact,
    /// The arc slides along a face.
    Overlap,
    /// The chain solve did not converge.
    Unconverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Arc index within the trajectory (or the junction's arc on the left).
    pub arc: usize,
    pub face: Option<usize>,
    pub vertex: Option<usize>,
    pub time: f64,
    pub lambda: Option<f64>,
}

/// Checks one arc against every face. Contacts on faces incident to a
/// `junctions` vertex at its junction time are left to the junction check.
pub fn arc_feasible(arc: &CubicArc, env: &PolygonEnvironment, junctions: &[Junction]) -> Result<(), Violation> {
    let window = JUNCTION_WINDOW * arc.duration().max(f64::MIN_POSITIVE);
    let at_junction = |face: usize, t: f64| {
        junctions.iter().any(|j| (t - j.time).abs() <= window && env.face_touches_vertex(face, j.vertex))
    };
    let mut first: Option<Violation> = None;
    let mut note = |v: Violation| {
        if first.as_ref().is_none_or(|f| v.time < f.time) {
            first = Some(v);
        }
    };
    for k in 0..env.faces().len() {
        let face = env.face(k);
        let events = match crossing_times(arc, env, k) {
            Ok(events) => events,
            Err(DegenerateOverlap) => {
                if let Some(v) = overlap_violation(arc, env, k, junctions) {
                    note(v);
                }
                continue;
            }
        };
        for ev in events {
            if at_junction(k, ev.time) {
                continue;
            }
            let (kind, vertex) = match ev.kind {
                CrossingKind::InteriorCrossing => (ViolationKind::Crossing, None),
                CrossingKind::VertexContactStart => (ViolationKind::UnexpectedContact, Some(face.start)),
                CrossingKind::VertexContactEnd => (ViolationKind::UnexpectedContact, Some(face.end)),
            };
            note(Violation { kind, arc: 0, face: Some(k), vertex, time: ev.time, lambda: Some(ev.lambda) });
        }
    }
    first.map_or(Ok(()), Err)
}

/// An arc on the supporting line of face `k` is feasible only if it meets the
/// closed face in at most one point, and that point is one of its junctions.
fn overlap_violation(arc: &CubicArc, env: &PolygonEnvironment, k: usize, junctions: &[Junction]) -> Option<Violation> {
    let face = env.face(k);
    // Range of the projection P_k over the arc: endpoints plus critical points.
    let local = arc.local_coeffs();
    let t = face.tangent;
    let d = [local[1].dot(&t), 2.0 * local[2].dot(&t), 3.0 * local[3].dot(&t)];
    let mut taus = vec![0.0, arc.duration()];
    if let Ok(roots) = cubic_roots(&[d[0], d[1], d[2], 0.0], d.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
        taus.extend(roots.into_iter().filter(|&x| x > 0.0 && x < arc.duration()));
    }
    let proj = |tau: f64| env.project_onto_face(&arc.position(arc.t_start + tau), k);
    let (lo, hi) = taus
        .iter()
        .map(|&tau| proj(tau))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let tol = 1e-9 * face.length;
    let overlap_lo = lo.max(0.0);
    let overlap_hi = hi.min(face.length);
    if overlap_hi < overlap_lo - tol {
        return None;
    }
    let touches_only = |at: f64, vertex: usize| {
        overlap_hi - overlap_lo <= tol && (overlap_lo - at).abs() <= tol && junctions.iter().any(|j| j.vertex == vertex)
    };
    if touches_only(0.0, face.start) || touches_only(face.length, face.end) {
        return None;
    }
    Some(Violation {
        kind: ViolationKind::Overlap,
        arc: 0,
        face: Some(k),
        vertex: None,
        time: arc.t_start,
        lambda: None,
    })
}

fn check_junction(env: &PolygonEnvironment, solution: &ChainSolution, index: usize) -> Result<(), Violation> {
    let junction = solution.trajectory.junctions[index];
    let v = solution.trajectory.arcs[index].eval_unchecked(junction.time).v;
    if vertex_contact_legal(env, junction.vertex, &v) {
        Ok(())
    } else {
        Err(Violation {
            kind: ViolationKind::IllegalContact,
            arc: index,
            face: None,
            vertex: Some(junction.vertex),
            time: junction.time,
            lambda: None,
        })
    }
}

/// Feasibility on `[t⁰, t_N]`: the first `n_prefix` arcs and junctions.
/// An unconverged solution is never feasible.
pub fn prefix_feasible(env: &PolygonEnvironment, solution: &ChainSolution, n_prefix: usize) -> Result<(), Violation> {
    check_arcs(env, solution, n_prefix.min(solution.times.len()), n_prefix.min(solution.times.len()))
}

/// Feasibility of the whole trajectory on `[t⁰, t^f]`.
pub fn trajectory_feasible(env: &PolygonEnvironment, solution: &ChainSolution) -> Result<(), Violation> {
    let n = solution.times.len();
    check_arcs(env, solution, n + 1, n)
}

fn check_arcs(
    env: &PolygonEnvironment,
    solution: &ChainSolution,
    arcs: usize,
    junctions: usize,
) -> Result<(), Violation> {
    if !solution.converged {
        return Err(Violation {
            kind: ViolationKind::Unconverged,
            arc: 0,
            face: None,
            vertex: None,
            time: solution.trajectory.start_time(),
            lambda: None,
        });
    }
    let traj = &solution.trajectory;
    for j in 0..junctions {
        check_junction(env, solution, j)?;
    }
    for (j, arc) in traj.arcs.iter().enumerate().take(arcs) {
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(traj.junctions.len());
        arc_feasible(arc, env, &traj.junctions[lo..hi]).map_err(|v| Violation { arc: j, ..v })?;
    }
    Ok(())
}
