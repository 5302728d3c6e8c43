//! Audit run configuration.
//!
//! Loaded from a JSON object; every numeric key is range-checked and errors
//! name the offending key.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub max_concurrency: u32,
    pub per_host_delay_ms: u64,
    pub timeout_ms: u64,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub probe_budget: u32,
    pub base_url_override: Option<Url>,
    pub redact_tokens: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            max_concurrency: 8,
            per_host_delay_ms: 500,
            timeout_ms: 10_000,
            retries: 2,
            retry_backoff_ms: 200,
            probe_budget: 12,
            base_url_override: None,
            redact_tokens: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not a JSON object: {0}")]
    Syntax(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key:?}: expected {expected}")]
    Type { key: String, expected: &'static str },
    #[error("config key {key:?} = {value} is outside {min}..={max}")]
    OutOfRange {
        key: String,
        value: u64,
        min: u64,
        max: u64,
    },
}

/// (key, min, max) for every integer setting.
const RANGES: &[(&str, u64, u64)] = &[
    ("max_concurrency", 1, 256),
    ("per_host_delay_ms", 0, 60_000),
    ("timeout_ms", 1, 600_000),
    ("retries", 0, 10),
    ("retry_backoff_ms", 0, 10_000),
    ("probe_budget", 1, 100),
];

fn check(key: &str, value: u64) -> Result<u64, ConfigError> {
    let &(_, min, max) = RANGES.iter().find(|(k, _, _)| *k == key).expect("known key");
    if (min..=max).contains(&value) {
        Ok(value)
    } else {
        Err(ConfigError::OutOfRange {
            key: key.into(),
            value,
            min,
            max,
        })
    }
}

impl AuditConfig {
    /// Applies the keys of a JSON object on top of `self`.
    pub fn merge_json(mut self, text: &str) -> Result<Self, ConfigError> {
        let tree: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let obj = tree
            .as_object()
            .ok_or_else(|| ConfigError::Syntax("top level must be an object".into()))?;
        for (key, value) in obj {
            let int = || {
                value.as_u64().ok_or(ConfigError::Type {
                    key: key.clone(),
                    expected: "a non-negative integer",
                })
            };
            match key.as_str() {
                "max_concurrency" => self.max_concurrency = check(key, int()?)? as u32,
                "per_host_delay_ms" => self.per_host_delay_ms = check(key, int()?)?,
                "timeout_ms" => self.timeout_ms = check(key, int()?)?,
                "retries" => self.retries = check(key, int()?)? as u32,
                "retry_backoff_ms" => self.retry_backoff_ms = check(key, int()?)?,
                "probe_budget" => self.probe_budget = check(key, int()?)? as u32,
                "redact_tokens" => {
                    self.redact_tokens = value.as_bool().ok_or(ConfigError::Type {
                        key: key.clone(),
                        expected: "a boolean",
                    })?
                }
                "base_url_override" => {
                    self.base_url_override = match value {
                        Value::Null => None,
                        Value::String(s) => Some(Url::parse(s).map_err(|_| ConfigError::Type {
                            key: key.clone(),
                            expected: "an absolute URL",
                        })?),
                        _ => {
                            return Err(ConfigError::Type {
                                key: key.clone(),
                                expected: "an absolute URL",
                            })
                        }
                    }
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        Ok(self)
    }

    /// Re-checks every range; used after flag overrides are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        check("max_concurrency", u64::from(self.max_concurrency))?;
        check("per_host_delay_ms", self.per_host_delay_ms)?;
        check("timeout_ms", self.timeout_ms)?;
        check("retries", u64::from(self.retries))?;
        check("retry_backoff_ms", self.retry_backoff_ms)?;
        check("probe_budget", u64::from(self.probe_budget))?;
        Ok(())
    }
}
