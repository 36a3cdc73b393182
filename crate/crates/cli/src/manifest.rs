//! Run manifest: one JSON file tying a run's inputs to its outputs.
//!
//! The manifest echoes the parsed config, records a digest over every input
//! file, and lists each artifact with its own digest, so two runs can be
//! compared without re-reading the data files.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::errors::{io_err, CliError};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a serde_json::Value,
    seed: u64,
    started_at: String,
    input_digest: String,
    inputs: &'a [InputRecord],
    tool_version: &'a str,
    workers: usize,
    artifacts: &'a [ArtifactRecord],
}

/// Start time for the manifest. Honors `SOURCE_DATE_EPOCH` so archived runs
/// can be reproduced byte for byte; otherwise the wall clock.
fn started_at() -> String {
    let stamp = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    stamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Order-sensitive digest over the individual input digests.
pub fn combined_digest(inputs: &[InputRecord]) -> String {
    let mut h = Sha256::new();
    for rec in inputs {
        h.update(rec.name.as_bytes());
        h.update(b"\0");
        h.update(rec.sha256.as_bytes());
        h.update(b"\0");
    }
    format!("{:x}", h.finalize())
}

#[allow(clippy::too_many_arguments)]
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &serde_json::Value,
    seed: u64,
    inputs: &[InputRecord],
    workers: usize,
    artifacts: &[ArtifactRecord],
) -> Result<(), CliError> {
    let m = Manifest {
        command,
        config,
        seed,
        started_at: started_at(),
        input_digest: combined_digest(inputs),
        inputs,
        tool_version: env!("CARGO_PKG_VERSION"),
        workers,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&m)
        .map_err(|e| CliError::Io(format!("serialize manifest: {e}")))?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n")
        .map_err(|e| io_err("write manifest.json", e))?;
    Ok(())
}
