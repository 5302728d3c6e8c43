//! Config resolution: defaults, then the JSON file, then flag overrides.

use std::path::{Path, PathBuf};

use storeaudit_core::config::{AuditConfig, ConfigError};
use url::Url;

pub const CONFIG_ENV: &str = "AUDIT_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read config file {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    File { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

/// Flag values that win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub max_concurrency: Option<u32>,
    pub per_host_delay_ms: Option<u64>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
    pub probe_budget: Option<u32>,
    pub base_url: Option<Url>,
    pub no_redact: bool,
}

impl Overrides {
    pub fn apply(&self, mut c: AuditConfig) -> AuditConfig {
        if let Some(v) = self.max_concurrency {
            c.max_concurrency = v;
        }
        if let Some(v) = self.per_host_delay_ms {
            c.per_host_delay_ms = v;
        }
        if let Some(v) = self.timeout_ms {
            c.timeout_ms = v;
        }
        if let Some(v) = self.retries {
            c.retries = v;
        }
        if let Some(v) = self.probe_budget {
            c.probe_budget = v;
        }
        if let Some(v) = &self.base_url {
            c.base_url_override = Some(v.clone());
        }
        if self.no_redact {
            c.redact_tokens = false;
        }
        c
    }
}

pub fn load_file(base: AuditConfig, path: &Path) -> Result<AuditConfig, SettingsError> {
    let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    base.merge_json(&text).map_err(|source| SettingsError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// `file` is the `--config` flag, falling back to `$AUDIT_CONFIG` by the
/// caller. The result is validated; nothing is range-checked later.
pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<AuditConfig, SettingsError> {
    let base = match file {
        Some(p) => load_file(AuditConfig::default(), p)?,
        None => AuditConfig::default(),
    };
    let config = overrides.apply(base);
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"max_concurrency": 4, "retries": 1}"#).unwrap();
        let o = Overrides {
            max_concurrency: Some(16),
            ..Default::default()
        };
        let c = resolve(Some(&path), &o).unwrap();
        assert_eq!((c.max_concurrency, c.retries), (16, 1));
    }

    #[test]
    fn zero_concurrency_names_the_key() {
        let o = Overrides {
            max_concurrency: Some(0),
            ..Default::default()
        };
        let err = resolve(None, &o).unwrap_err().to_string();
        assert!(err.contains("max_concurrency"), "{err}");
    }

    #[test]
    fn bad_file_key_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"retries": 99}"#).unwrap();
        let err = resolve(Some(&path), &Overrides::default()).unwrap_err().to_string();
        assert!(err.contains("c.json") && err.contains("retries"), "{err}");
    }
}
