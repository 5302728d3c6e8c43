//! Manifest exposure discovery.
//!
//! Each plugin's legal link seeds a candidate list; candidates are fetched
//! in rank order until one yields a manifest, and the recorded fetch results
//! are classified into one of six accessibility verdicts.

mod candidates;

use std::collections::{BTreeMap, BTreeSet};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

pub use candidates::{
    generate_candidates, CandidateError, CandidateUrl, Derivation, STRIPPED_DIRECTORIES, STRIPPED_EXTENSIONS,
    TRUNCATION_DEPTHS, WELL_KNOWN_DIR, WELL_KNOWN_MANIFEST,
};

use crate::corpus::{Corpus, PluginId, PluginRecord};
use crate::domain::{host_matches, url_registrable_domain};
use crate::fetch::{FetchRequest, FetchResult, Fetcher};
use crate::manifest::parse_manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Accessible,
    HiddenRedirect,
    HostedGitHub,
    HostedGoogleDoc,
    OpenAIProtected,
    NativeUnreachable,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::Accessible,
        Verdict::HiddenRedirect,
        Verdict::OpenAIProtected,
        Verdict::HostedGoogleDoc,
        Verdict::HostedGitHub,
        Verdict::NativeUnreachable,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Accessible => "Accessible",
            Verdict::HiddenRedirect => "Hidden redirect",
            Verdict::HostedGitHub => "GitHub address",
            Verdict::HostedGoogleDoc => "Google Doc link",
            Verdict::OpenAIProtected => "OpenAI-protected domain",
            Verdict::NativeUnreachable => "Native URL unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibilityVerdict {
    pub verdict: Verdict,
    pub winning_url: Option<Url>,
    pub http_status: Option<u16>,
    pub evidence: String,
}

/// Statuses that count as a plain refusal.
pub const REFUSAL_STATUSES: [u16; 3] = [403, 404, 406];

fn seed_host(plugin: &PluginRecord) -> Option<String> {
    plugin
        .legal_info_url
        .as_ref()
        .and_then(|u| u.host_str())
        .map(str::to_ascii_lowercase)
}

fn is_github(host: &str) -> bool {
    host == "github.com" || host.ends_with(".githubusercontent.com")
}

fn is_google_doc(host: &str) -> bool {
    host == "docs.google.com" || host == "drive.google.com"
}

fn is_openai(host: &str) -> bool {
    host_matches(host, "openai.com")
}

fn parses_as_manifest(result: &FetchResult) -> bool {
    result.is_success() && parse_manifest(result.body_str().as_bytes()).is_ok()
}

/// Pure classification over recorded fetch results; first matching rule wins.
pub fn classify_accessibility(
    plugin: &PluginRecord,
    fetch_results: &[(CandidateUrl, FetchResult)],
) -> AccessibilityVerdict {
    let first_status = fetch_results.iter().find_map(|(_, r)| r.status);
    let verdict = |verdict, winning_url, http_status, evidence: String| AccessibilityVerdict {
        verdict,
        winning_url,
        http_status,
        evidence,
    };

    if let Some((cand, res)) = fetch_results.iter().find(|(_, r)| parses_as_manifest(r)) {
        return verdict(
            Verdict::Accessible,
            Some(cand.url.clone()),
            res.status,
            format!("manifest parsed from {}", res.final_url),
        );
    }

    let host = seed_host(plugin);
    if let Some(host) = host.as_deref() {
        if is_github(host) {
            return verdict(Verdict::HostedGitHub, None, first_status, format!("seed host {host}"));
        }
        if is_google_doc(host) {
            return verdict(
                Verdict::HostedGoogleDoc,
                None,
                first_status,
                format!("seed host {host}"),
            );
        }
        let all_refused =
            !fetch_results.is_empty() && fetch_results.iter().all(|(_, r)| matches!(r.status, Some(403 | 404)));
        if is_openai(host) && all_refused {
            return verdict(
                Verdict::OpenAIProtected,
                None,
                first_status,
                format!("seed host {host}, every candidate returned 403/404"),
            );
        }
    }

    let seed_domain = plugin.legal_info_url.as_ref().and_then(url_registrable_domain);
    for (cand, res) in fetch_results {
        if res.is_success() {
            let left_domain = url_registrable_domain(&res.final_url) != seed_domain;
            let why = if left_domain {
                format!("2xx after leaving the seed domain at {}", res.final_url)
            } else {
                format!(
                    "2xx without a manifest ({})",
                    res.content_type.as_deref().unwrap_or("no content-type")
                )
            };
            return verdict(Verdict::HiddenRedirect, Some(cand.url.clone()), res.status, why);
        }
        if let Some(status) = res.status {
            if !REFUSAL_STATUSES.contains(&status) {
                return verdict(
                    Verdict::HiddenRedirect,
                    Some(cand.url.clone()),
                    Some(status),
                    format!("unexpected status {status} at {}", res.final_url),
                );
            }
        }
    }

    let evidence = if fetch_results.is_empty() {
        "no candidates fetched".to_string()
    } else {
        let statuses: BTreeSet<String> = fetch_results
            .iter()
            .map(|(_, r)| {
                r.status
                    .map_or_else(|| "transport-error".to_string(), |s| s.to_string())
            })
            .collect();
        format!(
            "all {} candidates refused: {}",
            fetch_results.len(),
            statuses.into_iter().collect::<Vec<_>>().join(",")
        )
    };
    verdict(Verdict::NativeUnreachable, None, first_status, evidence)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusPartition {
    pub all: BTreeSet<PluginId>,
    pub exposed: BTreeSet<PluginId>,
    pub protected: BTreeSet<PluginId>,
}

pub fn partition_corpus(verdicts: &BTreeMap<PluginId, AccessibilityVerdict>) -> CorpusPartition {
    let mut p = CorpusPartition::default();
    for (id, v) in verdicts {
        p.all.insert(id.clone());
        if v.verdict == Verdict::Accessible {
            p.exposed.insert(id.clone());
        } else {
            p.protected.insert(id.clone());
        }
    }
    p
}

/// Counts per verdict with every verdict present (zero-filled).
pub fn verdict_counts<'a>(verdicts: impl IntoIterator<Item = &'a AccessibilityVerdict>) -> BTreeMap<Verdict, usize> {
    let mut counts: BTreeMap<Verdict, usize> = Verdict::ALL.iter().map(|v| (*v, 0)).collect();
    for v in verdicts {
        *counts.entry(v.verdict).or_default() += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAttempt {
    pub candidate: CandidateUrl,
    pub result: FetchResult,
}

/// One line of the verdicts file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginVerdict {
    pub snapshot_label: String,
    pub plugin_id: PluginId,
    pub verdict: Verdict,
    pub winning_url: Option<Url>,
    pub http_status: Option<u16>,
    pub evidence: String,
    pub candidates_tried: Vec<CandidateAttempt>,
}

impl PluginVerdict {
    pub fn accessibility(&self) -> AccessibilityVerdict {
        AccessibilityVerdict {
            verdict: self.verdict,
            winning_url: self.winning_url.clone(),
            http_status: self.http_status,
            evidence: self.evidence.clone(),
        }
    }

    /// Re-runs classification over the recorded attempts.
    pub fn replay(&self, plugin: &PluginRecord) -> AccessibilityVerdict {
        let pairs: Vec<_> = self
            .candidates_tried
            .iter()
            .map(|a| (a.candidate.clone(), a.result.clone()))
            .collect();
        classify_accessibility(plugin, &pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscoveryRun {
    /// Sorted by plugin id.
    pub verdicts: Vec<PluginVerdict>,
    /// Verbatim manifest bodies of accessible plugins.
    pub manifests: BTreeMap<PluginId, String>,
}

async fn discover_one(fetcher: &Fetcher, label: &str, plugin: &PluginRecord) -> (PluginVerdict, Option<String>) {
    let mut tried: Vec<(CandidateUrl, FetchResult)> = Vec::new();
    let seed = plugin.legal_info_url.as_ref().map(Url::as_str);
    let candidates = match seed.map(generate_candidates) {
        Some(Ok(c)) => c,
        Some(Err(e)) => {
            tracing::debug!(plugin = %plugin.plugin_id, error = %e, "unusable seed");
            Vec::new()
        }
        None => Vec::new(),
    };
    for cand in candidates {
        let mut res = fetcher.fetch(FetchRequest::get(cand.url.clone())).await;
        let found = parses_as_manifest(&res);
        if !res.is_success() {
            res.body = None;
        }
        tried.push((cand, res));
        if found {
            break;
        }
    }
    let mut v = classify_accessibility(plugin, &tried);
    if seed.is_none() {
        v.evidence = "no seed URL".into();
    }
    let manifest = (v.verdict == Verdict::Accessible)
        .then(|| {
            tried
                .iter()
                .find(|(_, r)| parses_as_manifest(r))
                .map(|(_, r)| r.body_str().to_string())
        })
        .flatten();
    let record = PluginVerdict {
        snapshot_label: label.to_string(),
        plugin_id: plugin.plugin_id.clone(),
        verdict: v.verdict,
        winning_url: v.winning_url,
        http_status: v.http_status,
        evidence: v.evidence,
        candidates_tried: tried
            .into_iter()
            .map(|(candidate, result)| CandidateAttempt { candidate, result })
            .collect(),
    };
    (record, manifest)
}

/// Fetches candidates for every plugin, `in_flight` plugins at a time.
pub async fn run_discovery(corpus: &Corpus, fetcher: &Fetcher, in_flight: usize) -> DiscoveryRun {
    let mut results: Vec<(PluginVerdict, Option<String>)> = stream::iter(&corpus.records)
        .map(|p| discover_one(fetcher, &corpus.snapshot_label, p))
        .buffer_unordered(in_flight.max(1))
        .collect()
        .await;
    results.sort_by(|a, b| a.0.plugin_id.cmp(&b.0.plugin_id));
    let mut run = DiscoveryRun::default();
    for (v, m) in results {
        if let Some(m) = m {
            run.manifests.insert(v.plugin_id.clone(), m);
        }
        run.verdicts.push(v);
    }
    run
}
