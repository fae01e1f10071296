//! Seeded benchmark of the planner against the RRT* and PRM baselines.
//!
//! Outputs in the run directory:
//! - `bench.csv`: one row per environment and method;
//! - `cdf.csv`: empirical wall-clock CDF per method (omitted with masked timings);
//! - `corridor.csv` and `corridor.svg`: baseline length and energy bound against
//!   node budget on the corridor fixture, next to the planner's result;
//! - `summary.json` and `manifest.json`.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::anyhow;
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use polyplan::baselines::{
    energy_lower_bound, prm, rrt_star, BaselineError, Domain, PrmConfig, RrtConfig, WaypointPath,
};
use polyplan::bvp::{BoundaryConditions, SolverOptions};
use polyplan::envgen::{corridor_fixture, default_boundary, generate, EnvGenConfig};
use polyplan::geometry::{PolygonEnvironment, Vec2};
use polyplan::io::{fmt17, render_svg, Num, Overlay};
use polyplan::planner::{plan, PlanMode, PlanResult, PlannerConfig};

use crate::output::{derive_seed, layer, load_config, write_atomic, Manifest};
use crate::{parse_mode, path_length, Failure};

const ENV_STREAM: u64 = 1;
const RRT_STREAM: u64 = 2;
const PRM_STREAM: u64 = 3;
const CORRIDOR_STREAM: u64 = 4;

/// Sampling rate for planner path lengths.
const LENGTH_RATE: f64 = 1000.0;

pub const METHODS: [&str; 3] = ["planner", "rrt_star", "prm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Master seed; every environment and baseline seed is split from it.
    pub seed: u64,
    pub count: usize,
    pub width: f64,
    pub height: f64,
    pub points: usize,
    pub clusters: usize,
    pub endpoint_clearance: f64,
    pub obstacle_clearance: f64,
    /// `false` benchmarks the obstacle-free plane.
    pub obstacles: bool,
    pub tf: f64,
    pub mode: PlanMode,
    pub queue_cap: usize,
    pub nodes: usize,
    pub steer: f64,
    pub neighbors: usize,
    pub corridor: bool,
    /// Node budgets for the corridor table.
    pub budgets: Vec<usize>,
    /// Per-run planner time budget reported with the CDF.
    pub budget_ms: f64,
    /// Worker threads; 1 keeps wall-clock times free of contention, 0 uses all cores.
    pub jobs: usize,
    pub mask_timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let g = EnvGenConfig::default();
        BenchConfig {
            seed: 0,
            count: 100,
            width: g.width,
            height: g.height,
            points: g.points,
            clusters: g.clusters,
            endpoint_clearance: g.endpoint_clearance,
            obstacle_clearance: g.obstacle_clearance,
            obstacles: true,
            tf: 10.0,
            mode: PlanMode::Energy,
            queue_cap: PlannerConfig::default().queue_cap,
            nodes: RrtConfig::default().nodes,
            steer: RrtConfig::default().steer,
            neighbors: PrmConfig::default().neighbors,
            corridor: true,
            budgets: vec![250, 500, 1000, 2500],
            budget_ms: 2000.0,
            jobs: 1,
            mask_timings: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML config file, or a manifest from an earlier `bench` run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: BenchFlags,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct BenchFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random environments (default 100).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub endpoint_clearance: Option<f64>,
    #[arg(long)]
    pub obstacle_clearance: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub obstacles: Option<bool>,
    #[arg(long)]
    pub tf: Option<f64>,
    /// Planner mode: distance, energy or suffix (default energy).
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PlanMode>,
    #[arg(long)]
    pub queue_cap: Option<usize>,
    /// RRT* and PRM node budget (default 2500).
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub steer: Option<f64>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub corridor: Option<bool>,
    /// Comma-separated node budgets for the corridor table.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long)]
    pub budget_ms: Option<f64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mask_timings: Option<bool>,
}

/// One method on one environment.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub env_id: String,
    pub method: &'static str,
    pub budget: Option<usize>,
    pub wall_ms: Option<f64>,
    pub path_length: Option<f64>,
    pub energy_bound: Option<f64>,
    pub success: bool,
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn bench_csv(rows: &[Row]) -> String {
    let mut out = String::from("env_id,method,wall_ms,path_length,energy_bound,success\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.env_id,
            r.method,
            opt(r.wall_ms),
            opt(r.path_length),
            opt(r.energy_bound),
            r.success
        );
    }
    out
}

fn corridor_csv(rows: &[Row]) -> String {
    let mut out = String::from("method,budget,wall_ms,path_length,energy_bound,success\n");
    for r in rows {
        let budget = r.budget.map(|b| b.to_string()).unwrap_or_default();
        out += &format!(
            "{},{},{},{},{},{}\n",
            r.method,
            budget,
            opt(r.wall_ms),
            opt(r.path_length),
            opt(r.energy_bound),
            r.success
        );
    }
    out
}

struct Timed<T> {
    value: T,
    ms: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> Timed<T> {
    let start = Instant::now();
    let value = f();
    Timed { value, ms: start.elapsed().as_secs_f64() * 1e3 }
}

struct Task<'a> {
    cfg: &'a BenchConfig,
    env_id: String,
    env: &'a PolygonEnvironment,
    bc: BoundaryConditions,
    domain: Domain,
}

impl Task<'_> {
    fn ms(&self, ms: f64) -> Option<f64> {
        (!self.cfg.mask_timings).then_some(ms)
    }

    fn planner(&self) -> (Row, Option<PlanResult>) {
        let config = PlannerConfig { mode: self.cfg.mode, queue_cap: self.cfg.queue_cap, ..PlannerConfig::default() };
        let run = timed(|| plan(self.env, &self.bc, &config));
        let result = run.value.ok();
        let row = Row {
            env_id: self.env_id.clone(),
            method: METHODS[0],
            budget: None,
            wall_ms: self.ms(run.ms),
            path_length: result.as_ref().map(|r| path_length(&r.trajectory, LENGTH_RATE)),
            energy_bound: result.as_ref().map(|r| r.cost),
            success: result.is_some(),
        };
        (row, result)
    }

    fn baseline(&self, method: &'static str, nodes: usize, seed: u64) -> (Row, Option<WaypointPath>) {
        let run = timed(|| -> Result<WaypointPath, BaselineError> {
            if method == "rrt_star" {
                let cfg = RrtConfig { nodes, steer: self.cfg.steer, gamma: None, seed };
                rrt_star(self.env, &self.bc.p0, &self.bc.pf, &self.domain, &cfg)
            } else {
                let cfg = PrmConfig { nodes, neighbors: self.cfg.neighbors, seed };
                prm(self.env, &self.bc.p0, &self.bc.pf, &self.domain, &cfg)
            }
        });
        let path = run.value.ok();
        let energy = path
            .as_ref()
            .and_then(|p| energy_lower_bound(p, &self.bc, &SolverOptions::default()).ok())
            .filter(|s| s.converged)
            .map(|s| s.cost);
        let row = Row {
            env_id: self.env_id.clone(),
            method,
            budget: Some(nodes),
            wall_ms: self.ms(run.ms),
            path_length: path.as_ref().map(|p| p.length),
            energy_bound: energy,
            success: path.is_some(),
        };
        (row, path)
    }
}

#[derive(Debug, Serialize)]
struct EnvRun {
    env_id: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence: Option<Vec<usize>>,
}

fn run_environment(cfg: &BenchConfig, index: usize) -> (Vec<Row>, EnvRun) {
    let env_id = index.to_string();
    let seed = derive_seed(cfg.seed, ENV_STREAM, index as u64);
    let gen = EnvGenConfig {
        seed,
        width: cfg.width,
        height: cfg.height,
        points: cfg.points,
        clusters: cfg.clusters,
        endpoint_clearance: cfg.endpoint_clearance,
        obstacle_clearance: cfg.obstacle_clearance,
        ..EnvGenConfig::default()
    };
    let mut bc = default_boundary(&gen);
    bc.tf = bc.t0 + cfg.tf;
    let env = if cfg.obstacles { generate(&gen, &bc.p0, &bc.pf) } else { Ok(PolygonEnvironment::empty()) };
    let env = match env {
        Ok(env) => env,
        Err(e) => {
            let rows = METHODS
                .iter()
                .map(|&method| Row {
                    env_id: env_id.clone(),
                    method,
                    budget: None,
                    wall_ms: None,
                    path_length: None,
                    energy_bound: None,
                    success: false,
                })
                .collect();
            return (rows, EnvRun { env_id, seed, error: Some(e.to_string()), sequence: None });
        }
    };
    let task = Task {
        cfg,
        env_id: env_id.clone(),
        env: &env,
        bc,
        domain: Domain { min: Vec2::zeros(), max: Vec2::new(cfg.width, cfg.height) },
    };
    let (planner_row, result) = task.planner();
    let (rrt_row, _) = task.baseline("rrt_star", cfg.nodes, derive_seed(cfg.seed, RRT_STREAM, index as u64));
    let (prm_row, _) = task.baseline("prm", cfg.nodes, derive_seed(cfg.seed, PRM_STREAM, index as u64));
    let run = EnvRun { env_id, seed, error: None, sequence: result.map(|r| r.sequence) };
    (vec![planner_row, rrt_row, prm_row], run)
}

fn run_corridor(cfg: &BenchConfig) -> (Vec<Row>, String) {
    let (env, bc) = corridor_fixture();
    let task =
        Task { cfg, env_id: "corridor".into(), env: &env, bc, domain: Domain::around(&env, &bc.p0, &bc.pf, 0.2) };
    let (planner_row, result) = task.planner();
    let mut rows = vec![planner_row];
    let mut best: BTreeMap<&str, WaypointPath> = BTreeMap::new();
    for (i, &nodes) in cfg.budgets.iter().enumerate() {
        for (k, method) in ["rrt_star", "prm"].into_iter().enumerate() {
            let seed = derive_seed(cfg.seed, CORRIDOR_STREAM, (2 * i + k) as u64);
            let (row, path) = task.baseline(method, nodes, seed);
            rows.push(row);
            if let Some(p) = path {
                best.insert(method, p);
            }
        }
    }
    let overlays: Vec<Overlay> = best
        .iter()
        .map(|(&method, p)| Overlay {
            points: &p.points,
            color: if method == "rrt_star" { "#d62728" } else { "#1f77b4" },
            label: method,
        })
        .collect();
    let svg = render_svg(&env, &bc, result.as_ref().map(|r| &r.trajectory), LENGTH_RATE, &overlays);
    (rows, svg)
}

#[derive(Debug, Serialize)]
struct Comparison {
    mutual: usize,
    planner_at_most: usize,
    fraction: Option<Num>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    environments: usize,
    generated: usize,
    successes: BTreeMap<&'static str, usize>,
    /// Environments solved by some baseline but not by the planner.
    planner_missed: Vec<String>,
    energy_vs_baseline: BTreeMap<&'static str, Comparison>,
    budget_ms: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    planner_within_budget: Option<Num>,
}

fn summarize(cfg: &BenchConfig, rows: &[Row], generated: usize) -> Summary {
    let by_env: BTreeMap<&str, Vec<&Row>> = rows.iter().fold(BTreeMap::new(), |mut m, r| {
        m.entry(r.env_id.as_str()).or_insert_with(Vec::new).push(r);
        m
    });
    let mut successes = BTreeMap::new();
    for m in METHODS {
        successes.insert(m, rows.iter().filter(|r| r.method == m && r.success).count());
    }
    let row_of = |rs: &[&Row], m: &str| rs.iter().find(|r| r.method == m).copied().cloned();
    let mut planner_missed = Vec::new();
    let mut energy_vs_baseline = BTreeMap::new();
    for m in &METHODS[1..] {
        energy_vs_baseline.insert(*m, Comparison { mutual: 0, planner_at_most: 0, fraction: None });
    }
    for (id, rs) in &by_env {
        let planner = row_of(rs, "planner");
        let planner_ok = planner.as_ref().is_some_and(|r| r.success);
        if !planner_ok && rs.iter().any(|r| r.success) {
            planner_missed.push(id.to_string());
        }
        for m in &METHODS[1..] {
            let (Some(p), Some(b)) =
                (planner.as_ref().and_then(|r| r.energy_bound), row_of(rs, m).and_then(|r| r.energy_bound))
            else {
                continue;
            };
            let c = energy_vs_baseline.get_mut(m).expect("inserted above");
            c.mutual += 1;
            if p <= b {
                c.planner_at_most += 1;
            }
        }
    }
    for c in energy_vs_baseline.values_mut() {
        c.fraction = (c.mutual > 0).then(|| Num(c.planner_at_most as f64 / c.mutual as f64));
    }
    let planner_times: Vec<f64> =
        rows.iter().filter(|r| r.method == "planner" && r.success).filter_map(|r| r.wall_ms).collect();
    let planner_runs = rows.iter().filter(|r| r.method == "planner").count();
    let planner_within_budget = (!cfg.mask_timings && planner_runs > 0)
        .then(|| Num(planner_times.iter().filter(|&&t| t <= cfg.budget_ms).count() as f64 / planner_runs as f64));
    Summary {
        environments: cfg.count,
        generated,
        successes,
        planner_missed,
        energy_vs_baseline,
        budget_ms: Num(cfg.budget_ms),
        planner_within_budget,
    }
}

/// Empirical CDF of successful wall-clock times. Fractions are over all runs
/// of the method, so failures keep the curve below one.
fn cdf_csv(cfg: &BenchConfig, rows: &[Row]) -> String {
    let mut out = String::from("method,wall_ms,fraction,within_budget\n");
    for m in METHODS {
        let runs = rows.iter().filter(|r| r.method == m).count();
        let mut times: Vec<f64> =
            rows.iter().filter(|r| r.method == m && r.success).filter_map(|r| r.wall_ms).collect();
        times.sort_by(f64::total_cmp);
        for (i, t) in times.iter().enumerate() {
            let frac = (i + 1) as f64 / runs as f64;
            out += &format!("{m},{},{},{}\n", fmt17(*t), fmt17(frac), *t <= cfg.budget_ms);
        }
    }
    out
}

pub fn run(args: BenchArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => load_config(path, "bench")?,
        None => BenchConfig::default(),
    };
    let cfg: BenchConfig = layer(base, &args.flags)?;
    if !(cfg.tf > 0.0 && cfg.budget_ms > 0.0 && cfg.nodes > 0) {
        return Err(anyhow!("tf, budget_ms and nodes must be positive").into());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build().map_err(Failure::io)?;
    let (per_env, corridor) = pool.install(|| {
        let per_env: Vec<(Vec<Row>, EnvRun)> =
            (0..cfg.count).into_par_iter().map(|i| run_environment(&cfg, i)).collect();
        (per_env, cfg.corridor.then(|| run_corridor(&cfg)))
    });

    let rows: Vec<Row> = per_env.iter().flat_map(|(r, _)| r.iter().cloned()).collect();
    let runs: Vec<&EnvRun> = per_env.iter().map(|(_, r)| r).collect();
    let generated = runs.iter().filter(|r| r.error.is_none()).count();
    let summary = summarize(&cfg, &rows, generated);

    let dir = &args.out;
    let mut outputs = vec!["bench.csv".to_string(), "summary.json".to_string()];
    write_atomic(&dir.join("bench.csv"), &bench_csv(&rows)).map_err(Failure::io)?;
    if !cfg.mask_timings {
        write_atomic(&dir.join("cdf.csv"), &cdf_csv(&cfg, &rows)).map_err(Failure::io)?;
        outputs.push("cdf.csv".into());
    }
    if let Some((rows, svg)) = &corridor {
        write_atomic(&dir.join("corridor.csv"), &corridor_csv(rows)).map_err(Failure::io)?;
        write_atomic(&dir.join("corridor.svg"), svg).map_err(Failure::io)?;
        outputs.extend(["corridor.csv", "corridor.svg"].map(String::from));
    }
    let summary_text = serde_json::to_string_pretty(&summary).map_err(Failure::io)? + "\n";
    write_atomic(&dir.join("summary.json"), &summary_text).map_err(Failure::io)?;
    let seeds = runs.iter().map(|r| r.seed).collect();
    let runs = serde_json::to_value(&runs).map_err(Failure::io)?;
    Manifest::new("bench", &cfg, seeds, outputs, runs)?.write(&dir.join("manifest.json")).map_err(Failure::io)?;

    let solved = |m: &str| summary.successes.get(m).copied().unwrap_or(0);
    println!(
        "{} environments ({} generated): planner {}, rrt_star {}, prm {} solved",
        cfg.count,
        generated,
        solved("planner"),
        solved("rrt_star"),
        solved("prm")
    );
    if let Some(f) = summary.planner_within_budget {
        println!("planner within {} ms: {:.1}%", cfg.budget_ms, 100.0 * f.0);
    }
    Ok(())
}
