//! `polyplan` command-line front end.
//!
//! Every command that writes files also writes a `manifest.json` holding the
//! fully resolved configuration. Passing that manifest back through
//! `--config` reproduces the outputs byte for byte (wall-clock fields aside,
//! which `--mask-timings` removes).

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use clap::{Parser, Subcommand};

use polyplan::geometry::PolygonEnvironment;
use polyplan::io::environment_from_json;
use polyplan::planner::PlanMode;
use polyplan::trajectory::Trajectory;

pub mod bench;
pub mod envs;
pub mod export;
pub mod output;
pub mod plan;

pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PLANNING: i32 = 3;
pub const EXIT_OVERFLOW: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "polyplan",
    version,
    about = "Energy-optimal double-integrator trajectories around polygonal obstacles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a trajectory and write CSV, JSON, SVG and stats.
    Plan(plan::PlanArgs),
    /// Generate a random obstacle field (or a fixture) as environment JSON.
    GenEnv(envs::GenEnvArgs),
    /// Run the planner and the RRT*/PRM baselines over seeded environments.
    Bench(bench::BenchArgs),
    /// Check an environment file and report the first violation.
    Validate(envs::ValidateArgs),
    /// Re-sample a trajectory JSON into CSV and SVG.
    Export(export::ExportArgs),
}

/// A command failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: i32, error: impl Into<anyhow::Error>) -> Self {
        Failure { code, error: error.into() }
    }

    pub fn io(error: impl Into<anyhow::Error>) -> Self {
        Failure::new(EXIT_IO, error)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Anything not otherwise classified is bad input.
impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(EXIT_INVALID, error)
    }
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Plan(a) => plan::run(a),
        Command::GenEnv(a) => envs::gen_env(a),
        Command::Bench(a) => bench::run(a),
        Command::Validate(a) => envs::validate(a),
        Command::Export(a) => export::run(a),
    }
}

/// Reads and validates an environment file; `None` is the obstacle-free plane.
pub fn load_environment(path: Option<&Path>) -> anyhow::Result<PolygonEnvironment> {
    let Some(path) = path else { return Ok(PolygonEnvironment::empty()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    environment_from_json(&text).with_context(|| path.display().to_string())
}

pub fn parse_mode(s: &str) -> Result<PlanMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown mode `{s}` (expected distance, energy or suffix)"))
}

/// Polyline length of the trajectory sampled at `rate` Hz.
pub fn path_length(traj: &Trajectory, rate: f64) -> f64 {
    let samples = traj.sample(rate);
    samples.windows(2).map(|w| (w[1].1.p - w[0].1.p).norm()).sum()
}
