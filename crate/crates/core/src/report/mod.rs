//! Audit report aggregation and snapshot diffing.

mod render;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use url::Url;

pub use render::{render_diff, render_report, Format, UnknownFormat};

use crate::consistency::{inconsistent_plugins, plugins_per_kind, ConsistencyRun, Evidence, FindingKind, GroupBasis};
use crate::corpus::{Corpus, PluginId};
use crate::discovery::{verdict_counts, PluginVerdict, Verdict};
use crate::manifest::AuthType;
use crate::probe::{
    fmt_1dp, summarize_token_types, FailureCause, PluginProbe, TokenCase, TokenFamily, TokenTypeSummary,
    UnprobeableReason,
};
use crate::scoperisk::{CategoryShare, RiskCategory, ScopeRun};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Probe stage artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeArtifact {
    pub snapshot_label: String,
    pub plugins: Vec<PluginProbe>,
}

/// Consistency stage artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyArtifact {
    pub snapshot_label: String,
    pub run: ConsistencyRun,
}

/// Scope stage artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeArtifact {
    pub snapshot_label: String,
    pub run: ScopeRun,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("{stage} artifact is labelled {found:?}, expected {expected:?}")]
    LabelMismatch {
        stage: &'static str,
        found: String,
        expected: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedGroup {
    pub basis: GroupBasis,
    pub size: usize,
    pub members: Vec<PluginId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub probeable: usize,
    pub unprobeable: BTreeMap<UnprobeableReason, usize>,
    pub retrieved_data: usize,
    pub no_valid_data: usize,
    pub failed_endpoints: usize,
    pub server_side_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PluginDossier {
    pub store_title: String,
    pub developer_domain: Option<String>,
    pub verdict: Option<Verdict>,
    pub winning_url: Option<Url>,
    pub auth_type: Option<AuthType>,
    pub token_family: Option<TokenFamily>,
    pub unprobeable: Option<UnprobeableReason>,
    pub plugin_case: Option<TokenCase>,
    pub endpoints_probed: usize,
    /// Causes of failed endpoints, recorded only for plugins that yielded no valid data.
    pub failed_endpoints: BTreeMap<FailureCause, usize>,
    pub server_side_failures: usize,
    pub findings: BTreeMap<FindingKind, usize>,
    pub strict_findings: BTreeMap<FindingKind, usize>,
    pub scope: Option<String>,
    pub scope_category: Option<RiskCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub snapshot_label: String,
    pub corpus_size: usize,
    pub accessibility_table: BTreeMap<Verdict, usize>,
    pub case_table: BTreeMap<TokenCase, usize>,
    pub probe_summary: ProbeSummary,
    pub failure_table: BTreeMap<FailureCause, usize>,
    pub token_type_summary: TokenTypeSummary,
    /// Distinct plugins per finding kind.
    pub consistency_table: BTreeMap<FindingKind, usize>,
    pub consistency_strict_table: BTreeMap<FindingKind, usize>,
    pub inconsistent_plugins: usize,
    pub inconsistent_plugins_strict: usize,
    pub shared_manifest_groups: Vec<SharedGroup>,
    pub per_developer: BTreeMap<String, usize>,
    pub scope_distribution: BTreeMap<RiskCategory, CategoryShare>,
    /// Flat counters compared by [`diff_reports`].
    pub metrics: BTreeMap<String, usize>,
    pub per_plugin: BTreeMap<PluginId, PluginDossier>,
}

pub const METRIC_FILE_LEAKAGE: &str = "file_leakage";
pub const METRIC_INCONSISTENT_DATA: &str = "inconsistent_data";
pub const METRIC_NO_TOKEN_VALID: &str = "no_token_valid_retrievals";
pub const METRIC_OAUTH_VALID: &str = "oauth_valid_retrievals";
pub const METRIC_BEARER_VALID: &str = "bearer_valid_retrievals";

/// The five remediation metrics, in display order.
pub const HEADLINE_METRICS: [&str; 5] = [
    METRIC_FILE_LEAKAGE,
    METRIC_INCONSISTENT_DATA,
    METRIC_NO_TOKEN_VALID,
    METRIC_OAUTH_VALID,
    METRIC_BEARER_VALID,
];

fn check_label(stage: &'static str, found: &str, expected: &str) -> Result<(), ReportError> {
    if found == expected {
        Ok(())
    } else {
        Err(ReportError::LabelMismatch {
            stage,
            found: found.to_string(),
            expected: expected.to_string(),
        })
    }
}

fn count_kinds(findings: &[crate::consistency::ConsistencyFinding], id: &PluginId) -> BTreeMap<FindingKind, usize> {
    let mut m = BTreeMap::new();
    for f in findings.iter().filter(|f| &f.plugin_id == id) {
        *m.entry(f.kind).or_insert(0) += 1;
    }
    m
}

fn zero_filled<K: Ord + Copy>(keys: &[K], present: bool) -> BTreeMap<K, usize> {
    if present {
        keys.iter().map(|k| (*k, 0)).collect()
    } else {
        BTreeMap::new()
    }
}

pub fn build_report(
    corpus: &Corpus,
    verdicts: &[PluginVerdict],
    probes: &ProbeArtifact,
    consistency: &ConsistencyArtifact,
    scopes: &ScopeArtifact,
) -> Result<AuditReport, ReportError> {
    let label = corpus.snapshot_label.as_str();
    for v in verdicts {
        check_label("discover", &v.snapshot_label, label)?;
    }
    check_label("probe", &probes.snapshot_label, label)?;
    check_label("consistency", &consistency.snapshot_label, label)?;
    check_label("scopes", &scopes.snapshot_label, label)?;

    let mut per_plugin: BTreeMap<PluginId, PluginDossier> = corpus
        .records
        .iter()
        .map(|r| {
            (
                r.plugin_id.clone(),
                PluginDossier {
                    store_title: r.store_title.clone(),
                    developer_domain: r.developer_domain.clone(),
                    ..PluginDossier::default()
                },
            )
        })
        .collect();

    let accessibility_table = if verdicts.is_empty() {
        BTreeMap::new()
    } else {
        verdict_counts(verdicts.iter().map(|v| v.accessibility()).collect::<Vec<_>>().iter())
    };
    for v in verdicts {
        if let Some(d) = per_plugin.get_mut(&v.plugin_id) {
            d.verdict = Some(v.verdict);
            d.winning_url = v.winning_url.clone();
        }
    }

    let mut summary = ProbeSummary::default();
    let probed: Vec<&PluginProbe> = probes.plugins.iter().filter(|p| p.plugin_case.is_some()).collect();
    let mut case_table = zero_filled(&TokenCase::ALL, !probed.is_empty());
    let mut failure_table = zero_filled(&FailureCause::FAILURES, !probed.is_empty());
    for p in &probes.plugins {
        let d = per_plugin.entry(p.plugin_id.clone()).or_default();
        d.auth_type = Some(p.auth.auth_type);
        d.token_family = Some(TokenFamily::of(p.auth.auth_type));
        d.unprobeable = p.unprobeable;
        d.plugin_case = p.plugin_case;
        d.endpoints_probed = p.endpoints.len();
        if let Some(reason) = p.unprobeable {
            *summary.unprobeable.entry(reason).or_insert(0) += 1;
        }
        let Some(case) = p.plugin_case else { continue };
        summary.probeable += 1;
        *case_table.entry(case).or_insert(0) += 1;
        if case.retrieved_data() {
            summary.retrieved_data += 1;
            continue;
        }
        summary.no_valid_data += 1;
        for e in p.endpoints.iter().filter(|e| !e.valid_data) {
            *failure_table.entry(e.failure_cause).or_insert(0) += 1;
            *d.failed_endpoints.entry(e.failure_cause).or_insert(0) += 1;
            summary.failed_endpoints += 1;
        }
        let server_side = p
            .outcomes
            .iter()
            .filter(|o| o.server_side && o.request.token_variant == crate::probe::TokenVariant::NoToken)
            .count();
        d.server_side_failures = server_side;
        summary.server_side_failures += server_side;
    }
    let token_type_summary = summarize_token_types(probed.iter().map(|p| (&p.auth, p.plugin_case.expect("probed"))));

    let run = &consistency.run;
    let findings = &run.discrepancies.findings;
    let has_manifests = !probes.plugins.is_empty() || !findings.is_empty();
    let metadata_only = |t: BTreeMap<FindingKind, usize>| -> BTreeMap<FindingKind, usize> {
        if has_manifests {
            t
        } else {
            BTreeMap::new()
        }
    };
    let consistency_table = metadata_only(plugins_per_kind(findings));
    let consistency_strict_table = metadata_only(
        plugins_per_kind(&run.strict_findings)
            .into_iter()
            .filter(|(k, _)| FindingKind::METADATA.contains(k))
            .collect(),
    );
    let inconsistent = inconsistent_plugins(findings);
    let inconsistent_strict = inconsistent_plugins(&run.strict_findings);
    let mut shared_manifest_groups = Vec::new();
    for f in findings {
        if let Evidence::Group { basis, members, .. } = &f.evidence {
            shared_manifest_groups.push(SharedGroup {
                basis: *basis,
                size: members.len(),
                members: members.clone(),
            });
        }
    }
    for (id, d) in per_plugin.iter_mut() {
        d.findings = count_kinds(findings, id);
        d.strict_findings = count_kinds(&run.strict_findings, id);
    }

    for a in &scopes.run.assignments {
        let d = per_plugin.entry(a.document.plugin_id.clone()).or_default();
        d.scope = Some(a.document.raw_scope.clone());
        d.scope_category = Some(a.categorization.category);
    }

    let mut report = AuditReport {
        schema_version: REPORT_SCHEMA_VERSION,
        snapshot_label: label.to_string(),
        corpus_size: corpus.len(),
        accessibility_table,
        case_table,
        probe_summary: summary,
        failure_table,
        token_type_summary,
        consistency_table,
        consistency_strict_table,
        inconsistent_plugins: inconsistent.len(),
        inconsistent_plugins_strict: inconsistent_strict.len(),
        shared_manifest_groups,
        per_developer: run.discrepancies.per_developer.clone(),
        scope_distribution: scopes.run.distribution.clone(),
        metrics: BTreeMap::new(),
        per_plugin,
    };
    report.metrics = metrics_of(&report);
    Ok(report)
}

fn metrics_of(r: &AuditReport) -> BTreeMap<String, usize> {
    let fam = |f| r.token_type_summary.get(&f).map_or(0, |s| s.succeeded);
    let mut m = BTreeMap::from([
        (
            METRIC_FILE_LEAKAGE.to_string(),
            r.accessibility_table.get(&Verdict::Accessible).copied().unwrap_or(0),
        ),
        (METRIC_INCONSISTENT_DATA.to_string(), r.inconsistent_plugins),
        (METRIC_NO_TOKEN_VALID.to_string(), fam(TokenFamily::NoToken)),
        (METRIC_OAUTH_VALID.to_string(), fam(TokenFamily::OAuth)),
        (METRIC_BEARER_VALID.to_string(), fam(TokenFamily::Bearer)),
    ]);
    for (v, n) in &r.accessibility_table {
        m.insert(format!("verdict.{v:?}"), *n);
    }
    for (c, n) in &r.case_table {
        m.insert(format!("case.{c:?}"), *n);
    }
    for (c, n) in &r.failure_table {
        m.insert(format!("failure.{c:?}"), *n);
    }
    for (k, n) in &r.consistency_table {
        m.insert(format!("consistency.{k:?}"), *n);
    }
    m.insert("shared_manifest_groups".into(), r.shared_manifest_groups.len());
    m
}

/// Recounts every table from the dossiers; returns the first disagreement.
pub fn audit_internal_consistency(r: &AuditReport) -> Result<(), String> {
    let dossiers = r.per_plugin.values();
    let mut verdicts: BTreeMap<Verdict, usize> = r.accessibility_table.keys().map(|k| (*k, 0)).collect();
    let mut cases: BTreeMap<TokenCase, usize> = r.case_table.keys().map(|k| (*k, 0)).collect();
    let mut failures: BTreeMap<FailureCause, usize> = r.failure_table.keys().map(|k| (*k, 0)).collect();
    let mut kinds: BTreeMap<FindingKind, usize> = r.consistency_table.keys().map(|k| (*k, 0)).collect();
    let mut scopes: BTreeMap<RiskCategory, usize> = r.scope_distribution.keys().map(|k| (*k, 0)).collect();
    let mut inconsistent = 0;
    for d in dossiers {
        if let Some(v) = d.verdict {
            *verdicts.entry(v).or_insert(0) += 1;
        }
        if let Some(c) = d.plugin_case {
            *cases.entry(c).or_insert(0) += 1;
        }
        for (c, n) in &d.failed_endpoints {
            *failures.entry(*c).or_insert(0) += n;
        }
        for k in d.findings.keys() {
            *kinds.entry(*k).or_insert(0) += 1;
        }
        if d.findings.keys().any(|k| FindingKind::METADATA.contains(k)) {
            inconsistent += 1;
        }
        if let Some(c) = d.scope_category {
            *scopes.entry(c).or_insert(0) += 1;
        }
    }
    let scope_counts: BTreeMap<RiskCategory, usize> = r.scope_distribution.iter().map(|(k, s)| (*k, s.count)).collect();
    let checks = [
        ("accessibility_table", verdicts == r.accessibility_table),
        ("case_table", cases == r.case_table),
        ("failure_table", failures == r.failure_table),
        ("consistency_table", kinds == r.consistency_table),
        ("inconsistent_plugins", inconsistent == r.inconsistent_plugins),
        ("scope_distribution", scopes == scope_counts),
        (
            "accessibility sum",
            r.accessibility_table.is_empty() || r.accessibility_table.values().sum::<usize>() == r.corpus_size,
        ),
        (
            "case sum",
            r.case_table.values().sum::<usize>() == r.probe_summary.probeable,
        ),
    ];
    match checks.iter().find(|(_, ok)| !ok) {
        Some((name, _)) => Err(format!("{name} disagrees with per-plugin dossiers")),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDiff {
    pub name: String,
    pub before: usize,
    pub after: usize,
    /// `None` when `before` is zero.
    pub change_pct: Option<f64>,
}

impl MetricDiff {
    pub fn rendered_change(&self) -> String {
        match self.change_pct {
            Some(p) => format!("{}%", fmt_1dp(p)),
            None => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDiff {
    pub before_label: String,
    pub after_label: String,
    pub metrics: Vec<MetricDiff>,
}

pub fn change_pct(before: usize, after: usize) -> Option<f64> {
    (before != 0).then(|| (after as f64 - before as f64) / before as f64 * 100.0)
}

/// Headline metrics first, then every other metric both reports share.
pub fn diff_reports(before: &AuditReport, after: &AuditReport) -> ReportDiff {
    let shared: BTreeSet<&String> = before
        .metrics
        .keys()
        .filter(|k| after.metrics.contains_key(*k))
        .collect();
    let mut names: Vec<String> = HEADLINE_METRICS.iter().map(|s| s.to_string()).collect();
    names.extend(
        shared
            .into_iter()
            .filter(|k| !HEADLINE_METRICS.contains(&k.as_str()))
            .cloned(),
    );
    let metrics = names
        .into_iter()
        .map(|name| {
            let b = before.metrics.get(&name).copied().unwrap_or(0);
            let a = after.metrics.get(&name).copied().unwrap_or(0);
            MetricDiff {
                change_pct: change_pct(b, a),
                name,
                before: b,
                after: a,
            }
        })
        .collect();
    ReportDiff {
        before_label: before.snapshot_label.clone(),
        after_label: after.snapshot_label.clone(),
        metrics,
    }
}

#[cfg(test)]
mod tests;
