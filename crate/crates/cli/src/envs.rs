use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use serde::{Deserialize, Serialize};

use polyplan::envgen::{corridor_fixture, generate, EnvGenConfig};
use polyplan::geometry::{Convexity, Vec2};
use polyplan::io::environment_to_json;

use crate::output::{layer, load_config, parse_pair, write_atomic, Manifest};
use crate::{load_environment, Failure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenEnvConfig {
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub points: usize,
    pub clusters: usize,
    pub endpoint_clearance: f64,
    pub obstacle_clearance: f64,
    pub max_attempts: usize,
    /// Defaults to the lower-left corner of the domain.
    pub start: Option<[f64; 2]>,
    /// Defaults to the upper-right corner of the domain.
    pub goal: Option<[f64; 2]>,
    /// `corridor` writes the alternating-post fixture instead of a random field.
    pub fixture: Option<String>,
}

impl Default for GenEnvConfig {
    fn default() -> Self {
        let g = EnvGenConfig::default();
        GenEnvConfig {
            seed: g.seed,
            width: g.width,
            height: g.height,
            points: g.points,
            clusters: g.clusters,
            endpoint_clearance: g.endpoint_clearance,
            obstacle_clearance: g.obstacle_clearance,
            max_attempts: g.max_attempts,
            start: None,
            goal: None,
            fixture: None,
        }
    }
}

impl GenEnvConfig {
    pub fn generator(&self) -> EnvGenConfig {
        EnvGenConfig {
            seed: self.seed,
            width: self.width,
            height: self.height,
            points: self.points,
            clusters: self.clusters,
            endpoint_clearance: self.endpoint_clearance,
            obstacle_clearance: self.obstacle_clearance,
            max_attempts: self.max_attempts,
            ..EnvGenConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct GenEnvArgs {
    /// TOML config file, or a manifest from an earlier `gen-env` run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment JSON to write. The manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: GenEnvFlags,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct GenEnvFlags {
    #[arg(long)]
    pub seed: Option<u64>,
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
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub start: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub goal: Option<[f64; 2]>,
    /// Named fixture instead of a random field: `corridor`.
    #[arg(long)]
    pub fixture: Option<String>,
}

pub fn gen_env(args: GenEnvArgs) -> Result<(), Failure> {
    let base = match &args.config {
        Some(path) => load_config(path, "gen-env")?,
        None => GenEnvConfig::default(),
    };
    let cfg: GenEnvConfig = layer(base, &args.flags)?;
    let env = match cfg.fixture.as_deref() {
        Some("corridor") => corridor_fixture().0,
        Some(other) => return Err(anyhow!("unknown fixture `{other}` (expected corridor)").into()),
        None => {
            let v = |a: [f64; 2]| Vec2::new(a[0], a[1]);
            let p0 = v(cfg.start.unwrap_or([0.0, 0.0]));
            let pf = v(cfg.goal.unwrap_or([cfg.width, cfg.height]));
            generate(&cfg.generator(), &p0, &pf).map_err(anyhow::Error::from)?
        }
    };
    write_atomic(&args.out, &environment_to_json(&env)).map_err(Failure::io)?;
    let name = args.out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let runs = serde_json::json!({ "polygons": env.polygons().len(), "vertices": env.vertex_count() });
    let manifest = Manifest::new("gen-env", &cfg, vec![cfg.seed], vec![name], runs)?;
    manifest.write(&args.out.with_extension("manifest.json")).map_err(Failure::io)?;
    println!("{}: {} polygons, {} vertices", args.out.display(), env.polygons().len(), env.vertex_count());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Environment JSON to check.
    #[arg(long)]
    pub env: PathBuf,
    /// Also check that inflating by this robot radius keeps obstacles apart.
    #[arg(long)]
    pub radius: Option<f64>,
}

pub fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let env = load_environment(Some(&args.env))?;
    if let Some(r) = args.radius {
        env.inflate(r).map_err(|e| anyhow!("{}: inflation by {r} m: {e}", args.env.display()))?;
    }
    let reflex = (0..env.vertex_count()).filter(|&i| env.vertex_convexity(i) == Convexity::Reflex).count();
    println!(
        "{}: valid, {} polygons, {} vertices ({} reflex), {} faces",
        args.env.display(),
        env.polygons().len(),
        env.vertex_count(),
        reflex,
        env.faces().len()
    );
    Ok(())
}
