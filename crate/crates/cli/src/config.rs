//! Run configuration: JSON file, dotted-path overrides and the config hash.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use commrec::simgen::SimConfig;
use commrec::workflow::ExperimentSettings;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Corpus directory; the output directory when absent.
    pub corpus: Option<PathBuf>,
    /// Directory holding `vertices.tsv` and `edges.tsv`; the output directory when absent.
    pub graph: Option<PathBuf>,
    /// Meta-path file; `experiment.metapaths` or the default set when absent.
    pub metapaths: Option<PathBuf>,
    pub simulation: SimConfig,
    pub experiment: ExperimentSettings,
}

/// Effective configuration plus what produced it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub hash: String,
    pub overrides: Vec<String>,
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`; the value is read as JSON, else taken as a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override `{spec}` is not of the form key=value"))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for key in path.split('.') {
        slot = match slot {
            Value::Object(map) => map
                .get_mut(key)
                .with_context(|| format!("unknown config key `{path}`"))?,
            _ => bail!("config key `{path}` does not name an object field"),
        };
    }
    *slot = value;
    Ok(())
}

pub fn config_hash(config: &RunConfig) -> Result<String> {
    let mut v = serde_json::to_value(config)?;
    if let Value::Object(map) = &mut v {
        map.remove("seed");
    }
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&v)?)))
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Loaded> {
    let mut root = serde_json::to_value(RunConfig::default())?;
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
        let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
        if !file.is_object() {
            bail!("config {} must be a JSON object", p.display());
        }
        merge(&mut root, file);
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let config: RunConfig = serde_json::from_value(root).context("invalid config")?;
    Ok(Loaded {
        hash: config_hash(&config)?,
        config,
        overrides: overrides.to_vec(),
    })
}
