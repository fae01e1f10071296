//! Independent reference computations for tests.
//!
//! Each oracle reaches its answer by a different route than the library code
//! it checks: time discretization instead of closed forms, quadrature instead
//! of polynomial integrals, sampling instead of root finding, enumeration
//! instead of search.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvp::{BoundaryConditions, ChainSolution, SolverOptions};
use crate::feasibility::{prefix_feasible, trajectory_feasible};
use crate::geometry::{cross, from_rings, PolygonEnvironment, Vec2};
use crate::planner::{sequence_distance, solve_extension};
use crate::trajectory::CubicArc;

/// Minimum of `½ Σ ‖u_k‖² Δt` for the zero-order-hold double integrator over
/// `steps` equal intervals, from the minimum-norm solution of the two
/// terminal constraints per axis.
pub fn discrete_min_energy(p0: Vec2, v0: Vec2, pf: Vec2, vf: Vec2, horizon: f64, steps: usize) -> f64 {
    let dt = horizon / steps as f64;
    // Effect of u_k on (p_N, v_N).
    let g: Vec<Vector2<f64>> = (0..steps).map(|k| Vector2::new(dt * dt * (0.5 + (steps - 1 - k) as f64), dt)).collect();
    let gram: Matrix2<f64> = g.iter().map(|gk| gk * gk.transpose()).sum();
    let inv = gram.try_inverse().expect("controllable");
    let mut total = 0.0;
    for axis in 0..2 {
        let free_p = p0[axis] + v0[axis] * horizon;
        let target = Vector2::new(pf[axis] - free_p, vf[axis] - v0[axis]);
        let lambda = inv * target;
        total += g.iter().map(|gk| gk.dot(&lambda).powi(2)).sum::<f64>();
    }
    0.5 * total * dt
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// `½∫‖u‖²` of an arc by quadrature.
pub fn quadrature_energy(arc: &CubicArc) -> f64 {
    let f = |t: f64| 0.5 * arc.eval_unchecked(t).u.norm_squared();
    adaptive_simpson(&f, arc.t_start, arc.t_end, 1e-14)
}

/// Golden-section minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Cubic through the given boundary states by a per-axis 4×4 linear solve in
/// absolute time. Coefficients indexed by power.
pub fn hermite_by_solve(p0: Vec2, v0: Vec2, pf: Vec2, vf: Vec2, t0: f64, tf: f64) -> [Vec2; 4] {
    let row_p = |t: f64| [1.0, t, t * t, t * t * t];
    let row_v = |t: f64| [0.0, 1.0, 2.0 * t, 3.0 * t * t];
    let rows = [row_p(t0), row_v(t0), row_p(tf), row_v(tf)];
    let m = Matrix4::from_fn(|i, j| rows[i][j]);
    let lu = m.lu();
    let mut out = [Vec2::zeros(); 4];
    for axis in 0..2 {
        let rhs = Vector4::new(p0[axis], v0[axis], pf[axis], vf[axis]);
        let c = lu.solve(&rhs).expect("distinct times");
        for k in 0..4 {
            out[k][axis] = c[k];
        }
    }
    out
}

/// Sample intervals `(t_lo, t_hi)` where the arc changes side of the line
/// through `c1`–`c2` at a point within the segment.
pub fn sampled_crossings(arc: &CubicArc, c1: &Vec2, c2: &Vec2, samples: usize) -> Vec<(f64, f64)> {
    let e = c2 - c1;
    let side = |t: f64| cross(&(arc.position(t) - c1), &e);
    let along = |t: f64| (arc.position(t) - c1).dot(&e) / e.norm_squared();
    let h = arc.duration();
    let mut out = Vec::new();
    let mut prev_t = arc.t_start;
    let mut prev = side(prev_t);
    for i in 1..=samples {
        let t = if i == samples { arc.t_end } else { arc.t_start + h * i as f64 / samples as f64 };
        let s = side(t);
        if prev * s < 0.0 {
            // Locate the sign change by bisection before judging the segment range.
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if side(mid) * prev < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let lambda = along(0.5 * (lo + hi));
            if (0.0..=1.0).contains(&lambda) {
                out.push((prev_t, t));
            }
        }
        prev_t = t;
        prev = s;
    }
    out
}

/// Minimum-distance sequence of at most `max_len` vertices whose trajectory
/// is feasible and whose every prefix of length two or more is a feasible
/// prefix. Chains are solved along the same warm-start path as the planner.
pub fn enumerate_min_distance(
    env: &PolygonEnvironment,
    bc: &BoundaryConditions,
    max_len: usize,
    options: &SolverOptions,
) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |seq: &[usize], sol: &ChainSolution| {
        if trajectory_feasible(env, sol).is_ok() {
            let d = sequence_distance(env, bc, seq);
            let better = match &best {
                None => true,
                Some((bd, bs)) => d < *bd || (d == *bd && (seq.len(), seq) < (bs.len(), bs.as_slice())),
            };
            if better {
                best = Some((d, seq.to_vec()));
            }
        }
    };
    if let Ok(sol) = solve_extension(env, bc, &[], None, options) {
        consider(&[], &sol);
    }
    let mut stack: Vec<(Vec<usize>, ChainSolution)> = Vec::new();
    for k in 0..env.vertex_count() {
        if let Ok(sol) = solve_extension(env, bc, &[k], None, options) {
            stack.push((vec![k], sol));
        }
    }
    while let Some((seq, sol)) = stack.pop() {
        consider(&seq, &sol);
        if seq.len() >= max_len {
            continue;
        }
        for k in 0..env.vertex_count() {
            if seq.contains(&k) {
                continue;
            }
            let mut child = seq.clone();
            child.push(k);
            let Ok(child_sol) = solve_extension(env, bc, &child, Some(&sol), options) else { continue };
            if prefix_feasible(env, &child_sol, child.len()).is_ok() {
                stack.push((child, child_sol));
            }
        }
    }
    best
}

/// One or two random triangles (at most six vertices) near the diagonal of a
/// 10 m square, for the rest-to-rest task `(0, 0) → (10, 10)` in 10 s.
pub fn small_triangle_field(seed: u64) -> (PolygonEnvironment, BoundaryConditions) {
    let bc = BoundaryConditions::rest_to_rest(Vec2::zeros(), Vec2::new(10.0, 10.0), 0.0, 10.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let count = rng.random_range(1..=2);
        let rings: Vec<Vec<Vec2>> = (0..count)
            .map(|_| {
                let s = rng.random_range(2.0..8.0);
                let center = Vec2::new(s, s) + Vec2::new(1.0, -1.0) * rng.random_range(-1.0..1.0);
                let size = rng.random_range(0.8..2.0);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (0..3)
                    .map(|i| {
                        let a = phase + std::f64::consts::TAU * i as f64 / 3.0 + rng.random_range(-0.4..0.4);
                        center + Vec2::new(a.cos(), a.sin()) * size * rng.random_range(0.6..1.0)
                    })
                    .collect()
            })
            .collect();
        if let Ok(env) = from_rings(&rings, 0.1) {
            if env.point_free(&bc.p0) && env.point_free(&bc.pf) {
                return (env, bc);
            }
        }
    }
}
