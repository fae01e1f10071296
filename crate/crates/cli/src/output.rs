//! Output files, run manifests and seed derivation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "polyplan";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `contents` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp =
        tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Subordinate seed number `index` of stream `stream`, split from `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// The fully resolved configuration; pass the manifest to `--config` to replay.
    pub config: Value,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub runs: Value,
}

impl Manifest {
    pub fn new(
        command: &str,
        config: &impl Serialize,
        seeds: Vec<u64>,
        outputs: Vec<String>,
        runs: Value,
    ) -> Result<Self> {
        Ok(Manifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            seeds,
            outputs,
            runs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

/// Loads a command configuration from TOML, or from the `config` member of a
/// JSON run manifest written by the same command.
pub fn load_config<C: DeserializeOwned>(path: &Path, command: &str) -> Result<C> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
            anyhow::anyhow!("{}: malformed manifest at line {}, column {}: {e}", path.display(), e.line(), e.column())
        })?;
        if manifest.command != command {
            anyhow::bail!("{} is a manifest for `{}`, not `{command}`", path.display(), manifest.command);
        }
        return serde_json::from_value(manifest.config).with_context(|| format!("{}: invalid config", path.display()));
    }
    toml::from_str(&text).with_context(|| format!("{}: invalid config", path.display()))
}

/// Applies the flags that were given on the command line on top of `base`.
/// Unset flags serialize as `null` and are skipped.
pub fn layer<C: Serialize + DeserializeOwned>(base: C, flags: &impl Serialize) -> Result<C> {
    let mut merged = serde_json::to_value(base)?;
    let Value::Object(flags) = serde_json::to_value(flags)? else { anyhow::bail!("flags must be a struct") };
    let target = merged.as_object_mut().expect("configs are structs");
    for (k, v) in flags {
        if !v.is_null() {
            target.insert(k, v);
        }
    }
    Ok(serde_json::from_value(merged)?)
}

/// Parses `x,y`.
pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => Ok([x.parse().map_err(|e| format!("{x}: {e}"))?, y.parse().map_err(|e| format!("{y}: {e}"))?]),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}
