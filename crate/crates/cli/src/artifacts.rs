//! Output files and their sidecars.
//!
//! Every artifact `X` gets `X.meta.json`, a deterministic record of the
//! command, effective configuration and input hashes, and
//! `X.timestamps.json`, the only place wall-clock time appears.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use xaiqa::{Error, Result};

use crate::config::PipelineConfig;

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_ms(t: SystemTime) -> u128 {
    t.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn sidecar(artifact: &Path, suffix: &str) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    artifact.with_file_name(name)
}

/// One invocation of a subcommand.
pub struct Run<'a> {
    command: &'static str,
    cfg: &'a PipelineConfig,
    params: Value,
    inputs: Vec<PathBuf>,
    started: SystemTime,
}

impl<'a> Run<'a> {
    pub fn new(command: &'static str, cfg: &'a PipelineConfig) -> Self {
        Self { command, cfg, params: json!({}), inputs: Vec::new(), started: SystemTime::now() }
    }

    /// Records a command-specific parameter in the metadata.
    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params[key] = serde_json::to_value(value).unwrap_or(Value::Null);
    }

    /// Checks that every input exists, reporting all missing ones at once.
    pub fn inputs(&mut self, paths: &[&Path]) -> Result<()> {
        let missing: Vec<String> = paths.iter().filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::InvalidConfig(format!("missing input files: {}", missing.join(", "))));
        }
        self.inputs.extend(paths.iter().map(|p| p.to_path_buf()));
        Ok(())
    }

    /// Writes the sidecars for each produced artifact.
    pub fn finish(&self, outputs: &[&Path]) -> Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(json!({"path": p, "sha256": sha256_file(p)?})))
            .collect::<Result<Vec<Value>>>()?;
        let meta = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "params": self.params,
            "config": self.cfg,
            "inputs": inputs,
        });
        let finished = SystemTime::now();
        for out in outputs {
            write_json(&sidecar(out, ".meta.json"), &meta)?;
            write_json(
                &sidecar(out, ".timestamps.json"),
                &json!({"started_unix_ms": unix_ms(self.started), "finished_unix_ms": unix_ms(finished)}),
            )?;
            log::info!("wrote {}", out.display());
        }
        Ok(())
    }
}
