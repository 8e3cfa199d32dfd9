use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

/// Record of one invocation, written next to its outputs once everything
/// else has been written.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub flags: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// Wall-clock milliseconds per phase, plus `total`.
    pub timings_ms: BTreeMap<String, f64>,
    pub details: serde_json::Value,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start<A: Serialize>(subcommand: &str, flags: &A) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            flags: serde_json::to_value(flags).expect("flags serialize"),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: Vec::new(),
            timings_ms: BTreeMap::new(),
            details: serde_json::Value::Null,
            started: Some(Instant::now()),
        }
    }

    /// Runs `f`, recording its duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings_ms.entry(phase.to_string()).or_default() += t.elapsed().as_secs_f64() * 1e3;
        out
    }

    /// Default location: `DIR/manifest.json` for a directory output,
    /// `<file>.manifest.json` otherwise.
    pub fn default_path(output: &Path) -> PathBuf {
        if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.as_os_str().to_owned();
            name.push(".manifest.json");
            PathBuf::from(name)
        }
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        if let Some(t) = self.started.take() {
            self.timings_ms.insert("total".into(), t.elapsed().as_secs_f64() * 1e3);
        }
        let text = serde_json::to_string_pretty(&self)?;
        toposeg::io::write_atomic(path, text.as_bytes())?;
        Ok(())
    }
}
