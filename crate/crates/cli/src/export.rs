use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use serde::{Deserialize, Serialize};

use polyplan::bvp::BoundaryConditions;
use polyplan::io::{render_svg, trajectory_csv, trajectory_from_json};

use crate::output::{layer, load_config, write_atomic, Manifest};
use crate::{load_environment, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub trajectory: Option<PathBuf>,
    /// Obstacles drawn under the trajectory in the SVG.
    pub env: Option<PathBuf>,
    pub rate: f64,
    pub csv: bool,
    pub svg: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig { trajectory: None, env: None, rate: 1000.0, csv: true, svg: true }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// TOML config file, or a manifest from an earlier `export` run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: ExportFlags,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ExportFlags {
    /// Trajectory JSON written by `plan`.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Sampling rate in Hz (default 1000).
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub csv: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

pub fn run(args: ExportArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => load_config(path, "export")?,
        None => ExportConfig::default(),
    };
    let cfg: ExportConfig = layer(base, &args.flags)?;
    let path = cfg.trajectory.as_ref().ok_or_else(|| anyhow!("--trajectory is required"))?;
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(anyhow!("rate must be positive, got {}", cfg.rate).into());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let traj = trajectory_from_json(&text).with_context(|| path.display().to_string())?;
    let env = load_environment(cfg.env.as_deref())?;

    let mut outputs = Vec::new();
    if cfg.csv {
        write_atomic(&args.out.join("trajectory.csv"), &trajectory_csv(&traj, cfg.rate)).map_err(Failure::io)?;
        outputs.push("trajectory.csv".to_string());
    }
    if cfg.svg {
        let (t0, tf) = (traj.start_time(), traj.end_time());
        let first = traj.arcs[0].eval_unchecked(t0);
        let last = traj.arcs[traj.arcs.len() - 1].eval_unchecked(tf);
        let bc = BoundaryConditions { p0: first.p, v0: first.v, pf: last.p, vf: last.v, t0, tf, radius: 0.0 };
        write_atomic(&args.out.join("trajectory.svg"), &render_svg(&env, &bc, Some(&traj), cfg.rate, &[]))
            .map_err(Failure::io)?;
        outputs.push("trajectory.svg".to_string());
    }
    let runs = serde_json::json!({ "arcs": traj.arcs.len(), "energy": traj.energy() });
    Manifest::new("export", &cfg, Vec::new(), outputs, runs)?
        .write(&args.out.join("manifest.json"))
        .map_err(Failure::io)?;
    println!("exported {} arcs to {}", traj.arcs.len(), args.out.display());
    Ok(())
}
