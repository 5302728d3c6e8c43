//! On-disk stage artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use storeaudit_core::canonical::{to_canonical_compact, to_canonical_json};
use storeaudit_core::corpus::PluginId;
use storeaudit_core::manifest::{parse_manifest, ManifestDocument};
use storeaudit_core::probe::TranscriptEntry;

pub const VERDICTS: &str = "verdicts.json";
pub const MANIFESTS: &str = "manifests";
pub const OUTCOMES: &str = "outcomes.json";
pub const TRANSCRIPT: &str = "transcript.jsonl";
pub const FINDINGS: &str = "findings.json";
pub const SCOPES: &str = "scopes.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Canonical (sorted-key) pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = to_canonical_json(value).context("serializing artifact")?;
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// One `<plugin_id>.json` per manifest, bodies written verbatim.
pub fn write_manifests(dir: &Path, manifests: &BTreeMap<PluginId, String>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (id, body) in manifests {
        write_bytes(&dir.join(format!("{id}.json")), body.as_bytes())?;
    }
    Ok(())
}

/// Parses every `*.json` in `dir`. Unparseable files are logged and skipped.
pub fn read_manifests(dir: &Path) -> Result<BTreeMap<PluginId, ManifestDocument>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        match parse_manifest(&bytes) {
            Ok(doc) => {
                out.insert(PluginId(stem.to_string()), doc);
            }
            Err(e) => tracing::warn!(file = %path.display(), error = %e, "skipping unparseable manifest"),
        }
    }
    Ok(out)
}

pub fn parse_manifest_bodies(bodies: &BTreeMap<PluginId, String>) -> BTreeMap<PluginId, ManifestDocument> {
    bodies
        .iter()
        .filter_map(|(id, body)| match parse_manifest(body.as_bytes()) {
            Ok(doc) => Some((id.clone(), doc)),
            Err(e) => {
                tracing::warn!(plugin = %id, error = %e, "skipping unparseable manifest");
                None
            }
        })
        .collect()
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> Result<()> {
    ensure_parent(path)?;
    let mut f =
        std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for e in entries {
        writeln!(f, "{}", to_canonical_compact(e)?)?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}
