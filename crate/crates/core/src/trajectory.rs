//! Cubic position arcs and piecewise trajectories.
//!
//! Every arc stores its coefficients in absolute time:
//! `p(t) = a₃t³ + a₂t² + a₁t + a₀`, valid on `[t_start, t_end]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("time {t} is outside the interval [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("empty or reversed interval [{start}, {end}]")]
    EmptyInterval { start: f64, end: f64 },
}

/// Position, velocity, control and control rate at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcState {
    pub p: Vec2,
    pub v: Vec2,
    pub u: Vec2,
    pub jerk: Vec2,
}

/// One unconstrained arc. `coeffs[k]` multiplies `t^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicArc {
    pub coeffs: [Vec2; 4],
    pub t_start: f64,
    pub t_end: f64,
}

impl CubicArc {
    /// Arc from coefficients ordered `a₃, a₂, a₁, a₀`.
    pub fn new(a3: Vec2, a2: Vec2, a1: Vec2, a0: Vec2, t_start: f64, t_end: f64) -> Self {
        CubicArc { coeffs: [a0, a1, a2, a3], t_start, t_end }
    }

    /// Builds an arc from coefficients expressed in local time `τ = t − t_start`.
    pub fn from_local(local: [Vec2; 4], t_start: f64, t_end: f64) -> Self {
        CubicArc { coeffs: taylor_shift(&local, -t_start), t_start, t_end }
    }

    pub fn a3(&self) -> Vec2 {
        self.coeffs[3]
    }

    pub fn a2(&self) -> Vec2 {
        self.coeffs[2]
    }

    pub fn a1(&self) -> Vec2 {
        self.coeffs[1]
    }

    pub fn a0(&self) -> Vec2 {
        self.coeffs[0]
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Coefficients re-based to local time `τ = t − t_start`.
    pub fn local_coeffs(&self) -> [Vec2; 4] {
        taylor_shift(&self.coeffs, self.t_start)
    }

    pub fn eval(&self, t: f64) -> Result<ArcState, TrajectoryError> {
        if !(t >= self.t_start && t <= self.t_end) {
            return Err(TrajectoryError::TimeOutOfRange { t, start: self.t_start, end: self.t_end });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Evaluates the polynomial without the interval check.
    pub fn eval_unchecked(&self, t: f64) -> ArcState {
        let [a0, a1, a2, a3] = self.coeffs;
        ArcState {
            p: ((a3 * t + a2) * t + a1) * t + a0,
            v: (a3 * (3.0 * t) + a2 * 2.0) * t + a1,
            u: a3 * (6.0 * t) + a2 * 2.0,
            jerk: a3 * 6.0,
        }
    }

    pub fn position(&self, t: f64) -> Vec2 {
        self.eval_unchecked(t).p
    }

    /// `½∫‖u‖²dt` over the arc, integrated exactly.
    pub fn energy(&self) -> f64 {
        let local = self.local_coeffs();
        let slope = local[3] * 6.0;
        let u0 = local[2] * 2.0;
        let h = self.duration();
        0.5 * (slope.norm_squared() * h * h * h / 3.0 + slope.dot(&u0) * h * h + u0.norm_squared() * h)
    }

    /// Same geometric path traversed backwards over `[t0 + tf − t_end, t0 + tf − t_start]`.
    pub fn reflected(&self, t0: f64, tf: f64) -> CubicArc {
        // q(t) = p(t0 + tf − t): substitute t → −t, then shift.
        let [a0, a1, a2, a3] = self.coeffs;
        let negated = [a0, -a1, a2, -a3];
        CubicArc {
            coeffs: taylor_shift(&negated, -(t0 + tf)),
            t_start: t0 + tf - self.t_end,
            t_end: t0 + tf - self.t_start,
        }
    }
}

/// Coefficients of `p(t + shift)` given those of `p(t)` (index = power).
pub fn taylor_shift(c: &[Vec2; 4], shift: f64) -> [Vec2; 4] {
    let s = shift;
    [
        ((c[3] * s + c[2]) * s + c[1]) * s + c[0],
        (c[3] * (3.0 * s) + c[2] * 2.0) * s + c[1],
        c[3] * (3.0 * s) + c[2],
        c[3],
    ]
}

/// The unique cubic meeting position and velocity at both ends.
pub fn hermite_arc(p0: Vec2, v0: Vec2, pf: Vec2, vf: Vec2, t0: f64, tf: f64) -> Result<CubicArc, TrajectoryError> {
    let h = tf - t0;
    if !(h > 0.0) {
        return Err(TrajectoryError::EmptyInterval { start: t0, end: tf });
    }
    let dp = pf - p0;
    let a2 = (dp * 3.0 - (v0 * 2.0 + vf) * h) / (h * h);
    let a3 = (dp * -2.0 + (v0 + vf) * h) / (h * h * h);
    Ok(CubicArc::from_local([p0, v0, a2, a3], t0, tf))
}

/// A contact with an obstacle vertex joining two consecutive arcs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub vertex: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub arcs: Vec<CubicArc>,
    pub junctions: Vec<Junction>,
}

impl Trajectory {
    pub fn new(arcs: Vec<CubicArc>, junctions: Vec<Junction>) -> Self {
        debug_assert_eq!(arcs.len(), junctions.len() + 1);
        Trajectory { arcs, junctions }
    }

    pub fn start_time(&self) -> f64 {
        self.arcs[0].t_start
    }

    pub fn end_time(&self) -> f64 {
        self.arcs[self.arcs.len() - 1].t_end
    }

    pub fn energy(&self) -> f64 {
        self.arcs.iter().map(CubicArc::energy).sum()
    }

    /// Index of the arc covering `t` (the earlier arc at a junction).
    pub fn arc_index(&self, t: f64) -> Option<usize> {
        if t < self.start_time() || t > self.end_time() {
            return None;
        }
        Some(self.arcs.iter().position(|a| t <= a.t_end).unwrap_or(self.arcs.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Result<ArcState, TrajectoryError> {
        match self.arc_index(t) {
            Some(i) => Ok(self.arcs[i].eval_unchecked(t)),
            None => Err(TrajectoryError::TimeOutOfRange { t, start: self.start_time(), end: self.end_time() }),
        }
    }

    /// Uniform samples at `rate` Hz, always including both endpoints.
    pub fn sample(&self, rate: f64) -> Vec<(f64, ArcState)> {
        let (t0, tf) = (self.start_time(), self.end_time());
        let steps = (((tf - t0) * rate).ceil() as usize).max(1);
        (0..=steps)
            .map(|i| {
                let t = if i == steps { tf } else { t0 + (tf - t0) * i as f64 / steps as f64 };
                (t, self.eval(t).expect("sample time inside horizon"))
            })
            .collect()
    }

    /// The same path run backwards in time over the same horizon.
    pub fn time_reversed(&self) -> Trajectory {
        let (t0, tf) = (self.start_time(), self.end_time());
        let arcs = self.arcs.iter().rev().map(|a| a.reflected(t0, tf)).collect();
        let junctions =
            self.junctions.iter().rev().map(|j| Junction { vertex: j.vertex, time: t0 + tf - j.time }).collect();
        Trajectory { arcs, junctions }
    }

    /// Largest jumps in position, velocity and control across the junctions.
    pub fn continuity_gaps(&self) -> (f64, f64, f64) {
        let mut gaps = (0.0f64, 0.0f64, 0.0f64);
        for (i, j) in self.junctions.iter().enumerate() {
            let l = self.arcs[i].eval_unchecked(j.time);
            let r = self.arcs[i + 1].eval_unchecked(j.time);
            gaps.0 = gaps.0.max((l.p - r.p).norm());
            gaps.1 = gaps.1.max((l.v - r.v).norm());
            gaps.2 = gaps.2.max((l.u - r.u).norm());
        }
        gaps
    }
}
