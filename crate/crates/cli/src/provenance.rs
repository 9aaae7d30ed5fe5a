//! Content hashes and the provenance block stamped into every artifact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "ossmm-kit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of each input, keyed by a path relative to its root
    /// directory so that relocated runs hash identically.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            seed,
            inputs: BTreeMap::new(),
        }
    }

    /// Hashes `root/rel`; a missing file is reported against `producer`.
    pub fn add(&mut self, root: &Path, rel: &str, producer: &'static str) -> Result<(), CliError> {
        let path = root.join(rel);
        let digest = sha256_file(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::missing(&path, producer),
            _ => CliError::Internal(anyhow::anyhow!("{}: {e}", path.display())),
        })?;
        self.inputs.insert(rel.to_string(), digest);
        Ok(())
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    write_bytes(path, (text + "\n").as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, producer: &'static str) -> Result<T, CliError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CliError::missing(path, producer)),
        Err(e) => return Err(anyhow::anyhow!("{}: {e}", path.display()).into()),
    };
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}
