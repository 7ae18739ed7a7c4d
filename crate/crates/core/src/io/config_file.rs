//! TOML config files with dotted-path overrides.

use crate::config::{validate_config, ConfigViolation, SystemConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override `{0}` is not of the form key.path=value")]
    MalformedOverride(String),
    #[error("override `{key}`: {message}")]
    Override { key: String, message: String },
    #[error("invalid config: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ConfigViolation>),
}

/// Parses config text, applies `key.path=value` overrides and validates.
/// `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str, overrides: &[String]) -> Result<SystemConfig, ConfigError> {
    let parse_err = |e: toml::de::Error| ConfigError::Parse { origin: origin.to_string(), message: e.to_string() };
    let mut config: SystemConfig = toml::from_str(text).map_err(parse_err)?;
    if !overrides.is_empty() {
        let mut table: Table = text.parse().map_err(parse_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        config = SystemConfig::deserialize(Value::Table(table)).map_err(|e| ConfigError::Override {
            key: overrides.join(","),
            message: e.to_string(),
        })?;
    }
    let violations = validate_config(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text, &path.display().to_string(), overrides)
}

pub fn config_to_toml(config: &SystemConfig) -> String {
    toml::to_string_pretty(config).expect("config serialises to TOML")
}

/// The value is read as a TOML literal and taken as a bare string when it
/// is not one. Path segments may index arrays as `name[i]`.
fn apply_override(table: &mut Table, raw: &str) -> Result<(), ConfigError> {
    let (key, value) = raw.split_once('=').ok_or_else(|| ConfigError::MalformedOverride(raw.to_string()))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() {
        return Err(ConfigError::MalformedOverride(raw.to_string()));
    }
    let value = format!("v = {value}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    let fail = |message: String| ConfigError::Override { key: key.to_string(), message };
    let segments: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let (name, index) = match seg.split_once('[') {
            Some((n, rest)) => {
                let idx = rest
                    .strip_suffix(']')
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| fail(format!("bad index in `{seg}`")))?;
                (n, Some(idx))
            }
            None => (*seg, None),
        };
        let slot = match index {
            None if last => {
                node.insert(name.to_string(), value);
                return Ok(());
            }
            None => node.entry(name.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Some(idx) => {
                let arr = node
                    .get_mut(name)
                    .and_then(Value::as_array_mut)
                    .ok_or_else(|| fail(format!("`{name}` is not an array")))?;
                let len = arr.len();
                let elem = arr.get_mut(idx).ok_or_else(|| fail(format!("index {idx} out of range for `{name}` of length {len}")))?;
                if last {
                    *elem = value;
                    return Ok(());
                }
                elem
            }
        };
        node = slot.as_table_mut().ok_or_else(|| fail(format!("`{name}` is not a table")))?;
    }
    Ok(())
}
