use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use polyplan::bvp::{BoundaryConditions, SolverOptions};
use polyplan::geometry::Vec2;
use polyplan::io::{render_svg, trajectory_csv, trajectory_to_json, Num, Overlay};
use polyplan::planner::{plan, plan_min_distance, PlanError, PlanMode, PlanResult, PlannerConfig, SearchStats};

use crate::output::{layer, load_config, parse_pair, write_atomic, Manifest};
use crate::{load_environment, parse_mode, path_length, Failure, EXIT_INVALID, EXIT_OVERFLOW, EXIT_PLANNING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub env: Option<PathBuf>,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub v0: [f64; 2],
    pub vf: [f64; 2],
    pub t0: f64,
    pub tf: f64,
    pub radius: f64,
    pub mode: PlanMode,
    /// Export sampling rate in Hz.
    pub rate: f64,
    pub queue_cap: usize,
    pub max_iterations: usize,
    pub residual_tol: f64,
    pub parallel: bool,
    /// Write the solver iterations of the final chain to `trace.jsonl`.
    pub trace: bool,
    pub mask_timings: bool,
}

impl Default for PlanConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        PlanConfig {
            env: None,
            start: [0.0, 0.0],
            goal: [10.0, 10.0],
            v0: [0.0, 0.0],
            vf: [0.0, 0.0],
            t0: 0.0,
            tf: 10.0,
            radius: 0.0,
            mode: PlanMode::Distance,
            rate: 1000.0,
            queue_cap: PlannerConfig::default().queue_cap,
            max_iterations: solver.max_iterations,
            residual_tol: solver.residual_tol,
            parallel: true,
            trace: false,
            mask_timings: false,
        }
    }
}

impl PlanConfig {
    pub fn boundary(&self) -> BoundaryConditions {
        let v = |a: [f64; 2]| Vec2::new(a[0], a[1]);
        BoundaryConditions {
            p0: v(self.start),
            v0: v(self.v0),
            pf: v(self.goal),
            vf: v(self.vf),
            t0: self.t0,
            tf: self.tf,
            radius: self.radius,
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            mode: self.mode,
            solver: SolverOptions {
                max_iterations: self.max_iterations,
                residual_tol: self.residual_tol,
                trace: self.trace,
                ..SolverOptions::default()
            },
            queue_cap: self.queue_cap,
            parallel: self.parallel,
        }
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// TOML config file, or a manifest.json from an earlier `plan` run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: PlanFlags,
}

/// Overrides for [`PlanConfig`]; each flag matches the config key of the same name.
#[derive(Debug, Default, Args, Serialize)]
pub struct PlanFlags {
    /// Environment JSON. Omit for an obstacle-free plane.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Start position `x,y` (default 0,0).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub start: Option<[f64; 2]>,
    /// Goal position `x,y` (default 10,10).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub goal: Option<[f64; 2]>,
    /// Start velocity `x,y` (default rest).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub v0: Option<[f64; 2]>,
    /// Goal velocity `x,y` (default rest).
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub vf: Option<[f64; 2]>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Final time (default 10).
    #[arg(long)]
    pub tf: Option<f64>,
    /// Robot radius; obstacles are inflated by it before planning.
    #[arg(long)]
    pub radius: Option<f64>,
    /// distance, energy or suffix.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PlanMode>,
    /// Sampling rate for CSV and SVG in Hz (default 1000).
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub queue_cap: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub parallel: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trace: Option<bool>,
    /// Leave wall-clock times out of the outputs.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mask_timings: Option<bool>,
}

#[derive(Debug, Serialize)]
struct PlanStats {
    mode: PlanMode,
    sequence: Vec<usize>,
    junctions: usize,
    junction_times: Vec<Num>,
    cost: Num,
    distance: Num,
    path_length: Num,
    converged: bool,
    max_residual: Num,
    #[serde(flatten)]
    search: SearchSummary,
    /// Forward prefix search, reported next to the suffix result.
    #[serde(skip_serializing_if = "Option::is_none")]
    prefix_search: Option<Box<PlanOutcome>>,
}

#[derive(Debug, Serialize)]
struct SearchSummary {
    prefixes_expanded: usize,
    solver_calls: usize,
    max_queue: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<Num>,
}

impl SearchSummary {
    fn new(s: &SearchStats, mask: bool) -> Self {
        SearchSummary {
            prefixes_expanded: s.prefixes_expanded,
            solver_calls: s.solver_calls,
            max_queue: s.max_queue,
            wall_ms: (!mask).then_some(Num(s.wall_seconds * 1e3)),
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum PlanOutcome {
    Solved(PlanStats),
    Failed {
        mode: PlanMode,
        error: String,
        #[serde(flatten)]
        search: Option<SearchSummary>,
    },
}

fn outcome(cfg: &PlanConfig, mode: PlanMode, result: &Result<PlanResult, PlanError>) -> PlanOutcome {
    match result {
        Ok(r) => PlanOutcome::Solved(PlanStats {
            mode: r.mode,
            sequence: r.sequence.clone(),
            junctions: r.trajectory.junctions.len(),
            junction_times: r.solution.times.iter().copied().map(Num).collect(),
            cost: Num(r.cost),
            distance: Num(r.distance),
            path_length: Num(path_length(&r.trajectory, cfg.rate)),
            converged: r.solution.converged,
            max_residual: Num(r.solution.max_residual),
            search: SearchSummary::new(&r.stats, cfg.mask_timings),
            prefix_search: None,
        }),
        Err(e) => PlanOutcome::Failed {
            mode,
            error: e.to_string(),
            search: e.stats().map(|s| SearchSummary::new(s, cfg.mask_timings)),
        },
    }
}

fn exit_code(e: &PlanError) -> i32 {
    match e {
        PlanError::Environment(_) | PlanError::Boundary(_) => EXIT_INVALID,
        PlanError::NoFeasibleSequence { .. } => EXIT_PLANNING,
        PlanError::QueueOverflow { .. } => EXIT_OVERFLOW,
    }
}

pub fn run(args: PlanArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => load_config(path, "plan")?,
        None => PlanConfig::default(),
    };
    let cfg: PlanConfig = layer(base, &args.flags)?;
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(anyhow::anyhow!("rate must be positive, got {}", cfg.rate).into());
    }
    let env = load_environment(cfg.env.as_deref())?;
    let bc = cfg.boundary();
    let result = plan(&env, &bc, &cfg.planner());
    let mut stats = outcome(&cfg, cfg.mode, &result);
    let forward = (cfg.mode == PlanMode::Suffix).then(|| plan_min_distance(&env, &bc, &cfg.planner()));
    if let (PlanOutcome::Solved(s), Some(fwd)) = (&mut stats, &forward) {
        s.prefix_search = Some(Box::new(outcome(&cfg, PlanMode::Distance, fwd)));
    }

    let dir = &args.out;
    let mut outputs = vec!["stats.json".to_string()];
    if let Ok(r) = &result {
        write_atomic(&dir.join("trajectory.csv"), &trajectory_csv(&r.trajectory, cfg.rate)).map_err(Failure::io)?;
        write_atomic(&dir.join("trajectory.json"), &trajectory_to_json(&r.trajectory)).map_err(Failure::io)?;
        let forward_samples: Vec<Vec2> = match &forward {
            Some(Ok(f)) => f.trajectory.sample(cfg.rate).into_iter().map(|(_, s)| s.p).collect(),
            _ => Vec::new(),
        };
        let overlays: Vec<Overlay> = if forward_samples.is_empty() {
            Vec::new()
        } else {
            vec![Overlay { points: &forward_samples, color: "#ff7f0e", label: "prefix search" }]
        };
        let svg = render_svg(&env, &bc, Some(&r.trajectory), cfg.rate, &overlays);
        write_atomic(&dir.join("plan.svg"), &svg).map_err(Failure::io)?;
        outputs.extend(["trajectory.csv", "trajectory.json", "plan.svg"].map(String::from));
        if cfg.trace {
            let lines: Vec<String> =
                r.solution.trace.iter().map(serde_json::to_string).collect::<Result<_, _>>().map_err(Failure::io)?;
            write_atomic(&dir.join("trace.jsonl"), &(lines.join("\n") + "\n")).map_err(Failure::io)?;
            outputs.push("trace.jsonl".into());
        }
    }
    let stats_text = serde_json::to_string_pretty(&stats).map_err(Failure::io)? + "\n";
    write_atomic(&dir.join("stats.json"), &stats_text).map_err(Failure::io)?;
    let runs = serde_json::from_str(&stats_text).map_err(Failure::io)?;
    Manifest::new("plan", &cfg, Vec::new(), outputs, runs)?.write(&dir.join("manifest.json")).map_err(Failure::io)?;

    match result {
        Ok(r) => {
            println!(
                "{:?} plan: {} junctions, cost {:.6}, distance {:.6}",
                r.mode,
                r.sequence.len(),
                r.cost,
                r.distance
            );
            Ok(())
        }
        Err(e) => {
            let code = exit_code(&e);
            Err(Failure::new(code, e))
        }
    }
}
