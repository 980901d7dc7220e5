//! Run manifests: the resolved invocation written next to each output file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Command, Failure};

/// Relative output paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "DELAY_DUFFING_OUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub invocation: Command,
    pub outputs: Vec<PathBuf>,
}

pub fn resolve_out(out: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if out.is_relative() && !dir.is_empty() => Path::new(&dir).join(out),
        _ => out.to_path_buf(),
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write(out: &Path, invocation: &Command) -> Result<(), Failure> {
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        invocation: invocation.clone(),
        outputs: vec![out.to_path_buf()],
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(manifest_path(out), json + "\n")?;
    Ok(())
}

pub fn read(path: &Path) -> Result<RunManifest, Failure> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid manifest {}: {e}", path.display())))
}
