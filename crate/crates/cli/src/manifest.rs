use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// FNV-1a hash of the raw config bytes, recorded so runs can be traced back
/// to the exact configuration.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub package_version: String,
    /// Unix milliseconds; excluded from determinism comparisons.
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<PathBuf>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    config_hash: String,
    started: u128,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn start(command: &str, seed: u64, config_bytes: &[u8]) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config_hash: config_hash(config_bytes),
            started: now_ms(),
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(self, out_dir: &Path) -> std::io::Result<()> {
        // Outputs are recorded relative to the run directory so manifests
        // of identical runs are comparable.
        let outputs = self
            .outputs
            .iter()
            .map(|p| p.strip_prefix(out_dir).unwrap_or(p).to_path_buf())
            .collect();
        let manifest = RunManifest {
            schema_version: 1,
            command: self.command,
            seed: self.seed,
            config_hash: self.config_hash,
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            outputs,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(out_dir.join("manifest.json"), json)
    }
}
