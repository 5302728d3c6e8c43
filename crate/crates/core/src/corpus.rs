//! Plugin-store index ingestion and the canonical plugin identity.
//!
//! The index is newline-delimited JSON, one store listing per line. Each
//! listing is deduplicated on `(title, legal_info_url)` and assigned a
//! `plugin_id` derived from a SHA-256 of that key, so identities are stable
//! across runs and machines.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use crate::domain::{parse_absolute, url_registrable_domain};

pub const CORPUS_SCHEMA_VERSION: u32 = 1;

/// Opaque stable plugin identifier: first 16 hex chars of the dedup-key hash.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PluginId(pub String);

impl PluginId {
    pub fn from_listing(title: &str, legal_info_url: Option<&str>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(title.as_bytes());
        hasher.update([0u8]);
        hasher.update(legal_info_url.unwrap_or("").as_bytes());
        let digest = hex::encode(hasher.finalize());
        PluginId(digest[..16].to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for PluginId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFlag {
    LegalMissing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginRecord {
    pub plugin_id: PluginId,
    pub store_title: String,
    /// Name as shown in the store listing.
    pub name_for_human_store: String,
    /// Listing description, when the store shows one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_description: Option<String>,
    pub legal_info_url: Option<Url>,
    pub logo_url: Option<Url>,
    /// Lowercase registrable domain, no scheme or path.
    pub developer_domain: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<RecordFlag>,
}

impl PluginRecord {
    /// Name used for store-side comparisons; falls back to the title.
    pub fn store_name(&self) -> &str {
        if self.name_for_human_store.trim().is_empty() {
            &self.store_title
        } else {
            &self.name_for_human_store
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestError {
    /// 1-based line number in the source.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema_version: u32,
    pub snapshot_label: String,
    pub created_at: DateTime<Utc>,
    /// Sorted by `plugin_id`.
    pub records: Vec<PluginRecord>,
    #[serde(default)]
    pub ingest_errors: Vec<IngestError>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &PluginId) -> Option<&PluginRecord> {
        self.records
            .binary_search_by(|r| r.plugin_id.cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid corpus document (expected schema_version {expected}): {detail}")]
    Schema {
        path: PathBuf,
        expected: u32,
        detail: String,
    },
    #[error("{path}: corpus schema_version {found} is not supported (expected {expected})")]
    VersionMismatch { path: PathBuf, found: u64, expected: u32 },
}

#[derive(Debug, Deserialize)]
struct IndexEntry {
    title: Option<String>,
    #[serde(default)]
    name_for_human: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    legal_info_url: Option<String>,
    #[serde(default)]
    logo_url: Option<String>,
}

fn entry_to_record(entry: IndexEntry) -> Result<PluginRecord, String> {
    let title = entry
        .title
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .ok_or_else(|| "missing title".to_string())?;
    let legal_raw = entry
        .legal_info_url
        .map(|u| u.trim().to_string())
        .filter(|u| !u.is_empty());
    let legal_info_url = match &legal_raw {
        Some(raw) => Some(parse_absolute(raw).ok_or_else(|| format!("invalid legal_info_url {raw:?}"))?),
        None => None,
    };
    let logo_url = entry
        .logo_url
        .as_deref()
        .map(str::trim)
        .filter(|u| !u.is_empty())
        .and_then(parse_absolute);
    let plugin_id = PluginId::from_listing(&title, legal_raw.as_deref());
    let developer_domain = legal_info_url.as_ref().and_then(url_registrable_domain);
    let mut flags = Vec::new();
    if legal_info_url.is_none() {
        flags.push(RecordFlag::LegalMissing);
    }
    Ok(PluginRecord {
        plugin_id,
        name_for_human_store: entry.name_for_human.unwrap_or_else(|| title.clone()),
        store_title: title,
        store_description: entry.description,
        legal_info_url,
        logo_url,
        developer_domain,
        flags,
    })
}

/// Reads an NDJSON store index. Malformed lines are skipped and recorded in
/// `ingest_errors`; they never abort the ingest.
pub fn ingest_index_at<R: BufRead>(source: R, label: &str, created_at: DateTime<Utc>) -> std::io::Result<Corpus> {
    let mut by_id: BTreeMap<PluginId, PluginRecord> = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record = serde_json::from_str::<IndexEntry>(trimmed)
            .map_err(|e| format!("not a JSON index entry: {e}"))
            .and_then(entry_to_record);
        match record {
            Ok(record) => {
                // first listing wins on duplicate keys
                by_id.entry(record.plugin_id.clone()).or_insert(record);
            }
            Err(reason) => errors.push(IngestError { line: idx + 1, reason }),
        }
    }
    let corpus = Corpus {
        schema_version: CORPUS_SCHEMA_VERSION,
        snapshot_label: label.to_string(),
        created_at,
        records: by_id.into_values().collect(),
        ingest_errors: errors,
    };
    tracing::info!(
        records = corpus.records.len(),
        errors = corpus.ingest_errors.len(),
        "ingested store index"
    );
    Ok(corpus)
}

pub fn ingest_index<R: BufRead>(source: R, label: &str) -> std::io::Result<Corpus> {
    ingest_index_at(source, label, Utc::now())
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let body = crate::canonical::to_canonical_json(corpus).expect("corpus serializes");
    std::fs::write(path, body).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |detail: String| CorpusError::Schema {
        path: path.to_path_buf(),
        expected: CORPUS_SCHEMA_VERSION,
        detail,
    };
    let tree: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| schema(e.to_string()))?;
    let found = tree
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| schema("missing schema_version".into()))?;
    if found != u64::from(CORPUS_SCHEMA_VERSION) {
        return Err(CorpusError::VersionMismatch {
            path: path.to_path_buf(),
            found,
            expected: CORPUS_SCHEMA_VERSION,
        });
    }
    let mut corpus: Corpus = serde_json::from_value(tree).map_err(|e| schema(e.to_string()))?;
    corpus.records.sort_by(|a, b| a.plugin_id.cmp(&b.plugin_id));
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap()
    }

    fn line(title: &str, legal: &str) -> String {
        format!(r#"{{"title":"{title}","legal_info_url":"{legal}"}}"#)
    }

    #[test]
    fn empty_source_yields_empty_corpus() {
        let c = ingest_index_at("".as_bytes(), "first-assessment", at()).unwrap();
        assert!(c.is_empty());
        assert!(c.ingest_errors.is_empty());
    }

    #[test]
    fn duplicates_on_title_and_legal_url_collapse() {
        let src = [
            line("Digital Pet", "https://pet.io/legal"),
            line("Digital Pet", "https://pet.io/legal"),
            line("Digital Pet", "https://pet.io/terms"),
        ]
        .join("\n");
        let c = ingest_index_at(src.as_bytes(), "x", at()).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn thousand_thirty_three_distinct_listings() {
        let src: String = (0..1033)
            .map(|i| line(&format!("Plugin {i}"), &format!("https://p{i}.io/legal")) + "\n")
            .collect();
        let c = ingest_index_at(src.as_bytes(), "x", at()).unwrap();
        assert_eq!(c.len(), 1033);
    }

    #[test]
    fn malformed_lines_are_recorded_not_fatal() {
        let src = format!(
            "{}\nnot json\n{{\"legal_info_url\":\"https://x.io\"}}\n{}\n",
            line("A", "https://a.io/l"),
            line("B", "https://b.io/l")
        );
        let c = ingest_index_at(src.as_bytes(), "x", at()).unwrap();
        assert_eq!(c.len(), 2);
        let lines: Vec<usize> = c.ingest_errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3]);
    }

    #[test]
    fn missing_legal_is_retained_and_flagged() {
        let c = ingest_index_at(r#"{"title":"Lonely"}"#.as_bytes(), "x", at()).unwrap();
        assert_eq!(c.records[0].flags, vec![RecordFlag::LegalMissing]);
        assert_eq!(c.records[0].developer_domain, None);
    }

    #[test]
    fn developer_domain_is_registrable_lowercase() {
        let c = ingest_index_at(line("M", "https://WWW.MixerBox.com/terms?x=1").as_bytes(), "x", at()).unwrap();
        assert_eq!(c.records[0].developer_domain.as_deref(), Some("mixerbox.com"));
    }

    #[test]
    fn ingestion_is_order_independent_and_idempotent() {
        let a = [
            line("A", "https://a.io/l"),
            line("B", "https://b.io/l"),
            line("C", "https://c.io/l"),
        ];
        let fwd = a.join("\n");
        let rev: Vec<_> = a.iter().rev().cloned().collect();
        let c1 = ingest_index_at(fwd.as_bytes(), "x", at()).unwrap();
        let c2 = ingest_index_at(rev.join("\n").as_bytes(), "x", at()).unwrap();
        let c3 = ingest_index_at(fwd.as_bytes(), "x", at()).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1, c3);
        assert!(c1.records.windows(2).all(|w| w[0].plugin_id < w[1].plugin_id));
    }

    #[test]
    fn save_load_round_trip() {
        let src: String = (0..5)
            .map(|i| line(&format!("P{i}"), &format!("https://p{i}.io/legal")) + "\n")
            .collect();
        let c = ingest_index_at(src.as_bytes(), "first-assessment", at()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        save_corpus(&c, &path).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), c);
    }

    #[test]
    fn truncated_file_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        std::fs::write(&path, r#"{"schema_version": 1, "snapshot_label": "x", "rec"#).unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { .. }));
        assert!(err.to_string().contains("corpus.json"));
        assert!(err.to_string().contains("schema_version 1"));
    }

    #[test]
    fn future_schema_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        std::fs::write(
            &path,
            r#"{"schema_version": 7, "snapshot_label": "x", "created_at": "2024-01-01T00:00:00Z", "records": []}"#,
        )
        .unwrap();
        match load_corpus(&path).unwrap_err() {
            CorpusError::VersionMismatch { found, expected, .. } => {
                assert_eq!((found, expected), (7, 1));
            }
            other => panic!("unexpected {other}"),
        }
    }
}
