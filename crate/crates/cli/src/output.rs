use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::commands::RunOutput;
use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: &'a ExperimentConfig,
    outputs: Vec<&'a str>,
    violations: &'a [String],
    notes: &'a [String],
}

/// Writes to a temporary file in `dir` and renames it into place.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).with_context(|| format!("renaming into {name}"))?;
    Ok(())
}

/// Report files first, manifest last. Nothing is written unless every
/// result was computed.
pub fn write_all(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, bytes) in &out.files {
        write_atomic(dir, name, bytes)?;
    }
    // The output path is not part of the run's identity.
    let config = ExperimentConfig { output: None, ..cfg.clone() };
    let manifest = Manifest {
        tool: "enflo-lab",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.to_string(),
        config: &config,
        outputs: out.files.iter().map(|(n, _)| n.as_str()).collect(),
        violations: &out.violations,
        notes: &out.notes,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(dir, MANIFEST, text.as_bytes())
}
