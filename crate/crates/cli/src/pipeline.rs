//! Stage functions shared by the subcommands and `run-all`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use storeaudit_core::canonical::{sha256_hex, to_canonical_compact};
use storeaudit_core::config::{AuditConfig, ConfigError};
use storeaudit_core::consistency::{run_consistency, PrefixLexicon};
use storeaudit_core::corpus::{load_corpus, Corpus, PluginId};
use storeaudit_core::discovery::{run_discovery, DiscoveryRun};
use storeaudit_core::fetch::Fetcher;
use storeaudit_core::manifest::ManifestDocument;
use storeaudit_core::probe::{run_probe, ProbeOptions, ProbeRun};
use storeaudit_core::report::{
    build_report, render_report, AuditReport, ConsistencyArtifact, Format, ProbeArtifact, ScopeArtifact,
};
use storeaudit_core::scoperisk::{run_scopes, SeedLexicon};

use crate::artifacts::{self, parse_manifest_bodies, write_json};

pub const CACHE_DIR: &str = ".cache";

/// Bumped whenever a cached stage's output shape changes.
const CACHE_VERSION: u32 = 1;

pub fn fetcher_for(config: &AuditConfig) -> Result<Fetcher> {
    Fetcher::new(config).context("building HTTP client")
}

pub async fn discover(corpus: &Corpus, config: &AuditConfig) -> Result<DiscoveryRun> {
    let fetcher = fetcher_for(config)?;
    Ok(run_discovery(corpus, &fetcher, config.max_concurrency as usize).await)
}

pub fn probe_options(config: &AuditConfig) -> ProbeOptions {
    ProbeOptions {
        budget: config.probe_budget as usize,
        redact_tokens: config.redact_tokens,
        in_flight: config.max_concurrency as usize,
    }
}

pub async fn probe(manifests: &BTreeMap<PluginId, ManifestDocument>, config: &AuditConfig) -> Result<ProbeRun> {
    let fetcher = fetcher_for(config)?;
    Ok(run_probe(manifests, &fetcher, probe_options(config)).await)
}

pub fn consistency(corpus: &Corpus, manifests: &BTreeMap<PluginId, ManifestDocument>) -> ConsistencyArtifact {
    ConsistencyArtifact {
        snapshot_label: corpus.snapshot_label.clone(),
        run: run_consistency(corpus, manifests, &PrefixLexicon::default()),
    }
}

pub fn scopes(label: &str, manifests: &BTreeMap<PluginId, ManifestDocument>, lexicon: &SeedLexicon) -> ScopeArtifact {
    ScopeArtifact {
        snapshot_label: label.to_string(),
        run: run_scopes(manifests, lexicon),
    }
}

pub fn load_lexicon(path: &Path) -> Result<SeedLexicon> {
    artifacts::read_json(path).context("loading seed lexicon")
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{stage} stage failed: {source:#}")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Stage { .. } => 1,
        }
    }
}

trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Stage { stage, source })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Reuse network-stage outputs stored under `out/.cache`.
    pub cached: bool,
}

/// Paths and cache hits of a completed run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub report: AuditReport,
    pub discover_cached: bool,
    pub probe_cached: bool,
}

impl RunSummary {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Serialize)]
struct DiscoverKey<'a> {
    version: u32,
    stage: &'static str,
    corpus_sha256: String,
    timeout_ms: u64,
    retries: u32,
    base_url_override: Option<&'a str>,
}

#[derive(Serialize)]
struct ProbeKey<'a> {
    version: u32,
    stage: &'static str,
    manifests_sha256: String,
    probe_budget: u32,
    timeout_ms: u64,
    retries: u32,
    redact_tokens: bool,
    base_url_override: Option<&'a str>,
}

fn key_of<T: Serialize>(key: &T) -> String {
    sha256_hex(to_canonical_compact(key).expect("cache key serializes").as_bytes())
}

/// Content address of the discovery stage: corpus bytes plus every setting
/// that can change what the network returns.
pub fn discover_cache_key(corpus_bytes: &[u8], config: &AuditConfig) -> String {
    key_of(&DiscoverKey {
        version: CACHE_VERSION,
        stage: "discover",
        corpus_sha256: sha256_hex(corpus_bytes),
        timeout_ms: config.timeout_ms,
        retries: config.retries,
        base_url_override: config.base_url_override.as_ref().map(|u| u.as_str()),
    })
}

pub fn probe_cache_key(manifest_bodies: &BTreeMap<PluginId, String>, config: &AuditConfig) -> String {
    key_of(&ProbeKey {
        version: CACHE_VERSION,
        stage: "probe",
        manifests_sha256: sha256_hex(
            to_canonical_compact(manifest_bodies)
                .expect("map serializes")
                .as_bytes(),
        ),
        probe_budget: config.probe_budget,
        timeout_ms: config.timeout_ms,
        retries: config.retries,
        redact_tokens: config.redact_tokens,
        base_url_override: config.base_url_override.as_ref().map(|u| u.as_str()),
    })
}

fn cache_path(out: &Path, stage: &str, key: &str) -> PathBuf {
    out.join(CACHE_DIR).join(format!("{stage}-{key}.json"))
}

fn cache_get<T: DeserializeOwned>(path: &Path) -> Option<T> {
    if !path.is_file() {
        return None;
    }
    match artifacts::read_json(path) {
        Ok(v) => Some(v),
        Err(e) => {
            tracing::warn!(path = %path.display(), error = %format!("{e:#}"), "ignoring corrupt cache entry");
            None
        }
    }
}

/// discover → probe → consistency → scopes → report, writing each stage's
/// artifacts into `out` as soon as the stage finishes.
pub async fn run_all(
    config: &AuditConfig,
    corpus_path: &Path,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunSummary, RunError> {
    config.validate()?;
    let corpus_bytes = std::fs::read(corpus_path)
        .with_context(|| format!("reading {}", corpus_path.display()))
        .stage("ingest")?;
    let corpus = load_corpus(corpus_path).map_err(anyhow::Error::from).stage("ingest")?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .stage("discover")?;

    let key = discover_cache_key(&corpus_bytes, config);
    let cpath = cache_path(out, "discover", &key);
    let cached = if opts.cached {
        cache_get::<DiscoveryRun>(&cpath)
    } else {
        None
    };
    let discover_cached = cached.is_some();
    let discovery = match cached {
        Some(run) => run,
        None => {
            let run = discover(&corpus, config).await.stage("discover")?;
            if opts.cached {
                write_json(&cpath, &run).stage("discover")?;
            }
            run
        }
    };
    write_json(&out.join(artifacts::VERDICTS), &discovery.verdicts).stage("discover")?;
    let mdir = out.join(artifacts::MANIFESTS);
    if mdir.exists() {
        std::fs::remove_dir_all(&mdir)
            .with_context(|| format!("clearing {}", mdir.display()))
            .stage("discover")?;
    }
    artifacts::write_manifests(&mdir, &discovery.manifests).stage("discover")?;
    tracing::info!(
        plugins = discovery.verdicts.len(),
        manifests = discovery.manifests.len(),
        cached = discover_cached,
        "discover done"
    );

    let manifests = parse_manifest_bodies(&discovery.manifests);
    let key = probe_cache_key(&discovery.manifests, config);
    let cpath = cache_path(out, "probe", &key);
    let cached = if opts.cached {
        cache_get::<ProbeRun>(&cpath)
    } else {
        None
    };
    let probe_cached = cached.is_some();
    let probed = match cached {
        Some(run) => run,
        None => {
            let run = probe(&manifests, config).await.stage("probe")?;
            if opts.cached {
                write_json(&cpath, &run).stage("probe")?;
            }
            run
        }
    };
    let probe_artifact = ProbeArtifact {
        snapshot_label: corpus.snapshot_label.clone(),
        plugins: probed.plugins,
    };
    write_json(&out.join(artifacts::OUTCOMES), &probe_artifact).stage("probe")?;
    artifacts::write_transcript(&out.join(artifacts::TRANSCRIPT), &probed.transcript).stage("probe")?;
    tracing::info!(
        plugins = probe_artifact.plugins.len(),
        requests = probed.transcript.len(),
        cached = probe_cached,
        "probe done"
    );

    let findings = consistency(&corpus, &manifests);
    write_json(&out.join(artifacts::FINDINGS), &findings).stage("consistency")?;

    let scope_artifact = scopes(&corpus.snapshot_label, &manifests, &SeedLexicon::default());
    write_json(&out.join(artifacts::SCOPES), &scope_artifact).stage("scopes")?;

    let report = build_report(
        &corpus,
        &discovery.verdicts,
        &probe_artifact,
        &findings,
        &scope_artifact,
    )
    .map_err(anyhow::Error::from)
    .stage("report")?;
    artifacts::write_bytes(&out.join(artifacts::REPORT_JSON), &render_report(&report, Format::Json)).stage("report")?;
    artifacts::write_bytes(
        &out.join(artifacts::REPORT_MD),
        &render_report(&report, Format::Markdown),
    )
    .stage("report")?;

    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        report,
        discover_cached,
        probe_cached,
    })
}
