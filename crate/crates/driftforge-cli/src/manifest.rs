//! Run manifests: a JSON sidecar tying every output file to the digest of
//! the config that produced it.
//!
//! Data outputs are byte-deterministic for a given config; the manifest is
//! provenance metadata and carries wall-clock timestamps, so it is the one
//! file that differs between reruns.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use driftforge::error::Error;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

#[derive(Serialize)]
pub struct RunManifest {
    pub config_digest: String,
    pub tool_version: &'static str,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: Option<u128>,
    pub outputs: Vec<PathBuf>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(config_digest: &str) -> Self {
        RunManifest {
            config_digest: config_digest.to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_at_unix_ms: now_ms(),
            finished_at_unix_ms: None,
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write `<out>.manifest.json` next to the primary output.
    pub fn finish_to_sidecar(mut self, out: &Path) -> Result<(), Error> {
        self.finished_at_unix_ms = Some(now_ms());
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = out.with_file_name(name);
        let json = serde_json::to_vec_pretty(&self)
            .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, json)
            .map_err(|e| Error::Internal(format!("cannot write {}: {e}", path.display())))
    }
}
