//! Energy-optimal double-integrator trajectories through polygonal obstacle fields.
//!
//! Optimal trajectories are chains of cubic arcs joined at obstacle vertices.
//! [`bvp`] solves for the chain through a fixed vertex sequence,
//! [`feasibility`] checks it analytically against every obstacle face, and
//! [`planner`] searches vertex sequences by straight-line chain distance.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bvp;
pub mod envgen;
pub mod feasibility;
pub mod geometry;
pub mod io;
#[cfg(feature = "oracles")]
pub mod oracles;
pub mod planner;
pub mod roots;
pub mod trajectory;

pub use bvp::{BoundaryConditions, ChainProblem, ChainSolution, SolverError, SolverOptions};
pub use geometry::{Convexity, GeometryError, PolygonEnvironment, Vec2};
pub use trajectory::{CubicArc, Junction, Trajectory};
