//! Output directory handling: provenance envelopes, comment headers and cleanup on failure.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub overrides: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: Provenance,
    pub payload: T,
}

/// Writes into one directory and remembers every file written, so a failed
/// run can remove what it produced.
pub struct Outputs {
    dir: PathBuf,
    pub provenance: Provenance,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf, provenance: Provenance) -> Self {
        Outputs {
            dir,
            provenance,
            written: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(path.clone());
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<PathBuf> {
        let env = Envelope {
            provenance: self.provenance.clone(),
            payload,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Line-oriented output behind a `#` provenance comment.
    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let p = &self.provenance;
        let text = format!(
            "# {} {} config_hash={} seed={}\n{body}",
            p.tool, p.command, p.config_hash, p.seed
        );
        self.write(name, text.as_bytes())
    }

    /// Removes every file written so far.
    pub fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let env: Envelope<T> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(env.payload)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
