//! Serves a fixture plan, ingests its index and runs the full pipeline.

#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use storeaudit_cli::{run_all, RunOptions, RunSummary};
use storeaudit_core::config::AuditConfig;
use storeaudit_core::corpus::{ingest_index_at, save_corpus};
use storeaudit_fixture::{serve_fixtures, FixturePlan, FixtureServer};

pub const SEED: u64 = 42;
pub const CREATED_AT: &str = "2024-01-15T00:00:00Z";

pub fn fixture_config(server: &FixtureServer) -> AuditConfig {
    AuditConfig {
        max_concurrency: 64,
        per_host_delay_ms: 0,
        base_url_override: Some(server.base_url().parse().unwrap()),
        ..AuditConfig::default()
    }
}

pub async fn start(plan: &FixturePlan) -> FixtureServer {
    serve_fixtures(plan, SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .expect("fixture server starts")
}

/// Downloads `/index.ndjson` and writes `dir/corpus.json`.
pub async fn ingest(server: &FixtureServer, plan: &FixturePlan, dir: &Path) -> PathBuf {
    let url = format!("{}index.ndjson", server.base_url());
    let body = reqwest::get(&url)
        .await
        .unwrap()
        .error_for_status()
        .unwrap()
        .bytes()
        .await
        .unwrap();
    let created: DateTime<Utc> = CREATED_AT.parse().unwrap();
    let corpus = ingest_index_at(body.as_ref(), plan.snapshot_label(), created).unwrap();
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join("corpus.json");
    save_corpus(&corpus, &path).unwrap();
    path
}

/// One audit against a fresh server. Artifacts land in `dir/out`.
pub async fn audit(plan: &FixturePlan, dir: &Path) -> RunSummary {
    let server = start(plan).await;
    let corpus = ingest(&server, plan, dir).await;
    let summary = run_all(
        &fixture_config(&server),
        &corpus,
        &dir.join("out"),
        &RunOptions::default(),
    )
    .await
    .expect("run-all succeeds");
    server.shutdown().await;
    summary
}
