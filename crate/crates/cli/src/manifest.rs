use chrono::{DateTime, SecondsFormat, Utc};
use oran_ts::config::SystemConfig;
use oran_ts::io::config_to_toml;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where the config came from and its digests.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigSource {
    /// File path, or `builtin:desk`.
    pub source: String,
    /// SHA-256 of the file bytes, or of the built-in config's canonical text.
    pub sha256: String,
    pub overrides: Vec<String>,
    /// SHA-256 of the canonical text after overrides.
    pub effective_sha256: String,
}

impl ConfigSource {
    pub fn new(source: String, raw: &[u8], overrides: &[String], effective: &SystemConfig) -> Self {
        Self {
            source,
            sha256: sha256_hex(raw),
            overrides: overrides.to_vec(),
            effective_sha256: sha256_hex(config_to_toml(effective).as_bytes()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ConfigSource,
    pub seeds: Vec<u64>,
    pub schemes: Vec<String>,
    pub epochs: Option<usize>,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
