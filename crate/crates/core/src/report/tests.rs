use super::*;
use crate::consistency::{ConsistencyFinding, DiscrepancySet};
use crate::corpus::PluginRecord;
use crate::manifest::{AuthSpec, HttpMethod};
use crate::probe::EndpointResult;

fn corpus(titles: &[&str]) -> Corpus {
    let mut records: Vec<PluginRecord> = titles
        .iter()
        .map(|t| PluginRecord {
            plugin_id: PluginId::from_listing(t, None),
            store_title: t.to_string(),
            name_for_human_store: t.to_string(),
            store_description: None,
            legal_info_url: None,
            logo_url: None,
            developer_domain: None,
            flags: vec![],
        })
        .collect();
    records.sort_by(|a, b| a.plugin_id.cmp(&b.plugin_id));
    Corpus {
        schema_version: 1,
        snapshot_label: "first".into(),
        created_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
        records,
        ingest_errors: vec![],
    }
}

fn empty_inputs(label: &str) -> (ProbeArtifact, ConsistencyArtifact, ScopeArtifact) {
    (
        ProbeArtifact {
            snapshot_label: label.into(),
            plugins: vec![],
        },
        ConsistencyArtifact {
            snapshot_label: label.into(),
            run: ConsistencyRun::default(),
        },
        ScopeArtifact {
            snapshot_label: label.into(),
            run: ScopeRun::default(),
        },
    )
}

fn verdict(id: &PluginId, v: Verdict) -> PluginVerdict {
    PluginVerdict {
        snapshot_label: "first".into(),
        plugin_id: id.clone(),
        verdict: v,
        winning_url: None,
        http_status: None,
        evidence: String::new(),
        candidates_tried: vec![],
    }
}

fn probe(id: &PluginId, auth: AuthType, case: TokenCase, failed: &[FailureCause]) -> PluginProbe {
    PluginProbe {
        plugin_id: id.clone(),
        auth: AuthSpec {
            auth_type: auth,
            ..AuthSpec::none()
        },
        api_status: Some(200),
        unprobeable: None,
        skipped: vec![],
        outcomes: vec![],
        endpoints: failed
            .iter()
            .enumerate()
            .map(|(i, c)| EndpointResult {
                path: format!("/e{i}"),
                method: HttpMethod::Get,
                valid_data: false,
                failure_cause: *c,
            })
            .collect(),
        plugin_case: Some(case),
    }
}

#[test]
fn empty_corpus_gives_empty_tables() {
    let c = corpus(&[]);
    let (p, k, s) = empty_inputs("first");
    let r = build_report(&c, &[], &p, &k, &s).unwrap();
    assert!(r.accessibility_table.is_empty() && r.case_table.is_empty() && r.failure_table.is_empty());
    assert!(r.consistency_table.is_empty() && r.scope_distribution.is_empty() && r.per_plugin.is_empty());
    audit_internal_consistency(&r).unwrap();
    let md = String::from_utf8(render_report(&r, Format::Markdown)).unwrap();
    assert!(md.contains("| Category | Plugins |"));
    assert!(md.contains("| Case | Tr | Tv | O | Meaning | Plugins |"));
    assert!(!md.contains("| Accessible |"));
}

#[test]
fn single_plugin_tables_sum_to_one_or_zero() {
    let c = corpus(&["Solo"]);
    let id = c.records[0].plugin_id.clone();
    let (mut p, k, s) = empty_inputs("first");
    p.plugins.push(probe(
        &id,
        AuthType::None,
        TokenCase::Case5,
        &[FailureCause::ClientError],
    ));
    let r = build_report(&c, &[verdict(&id, Verdict::Accessible)], &p, &k, &s).unwrap();
    assert_eq!(r.per_plugin.len(), 1);
    for sum in [
        r.accessibility_table.values().sum::<usize>(),
        r.case_table.values().sum::<usize>(),
        r.failure_table.values().sum::<usize>(),
        r.consistency_table.values().sum::<usize>(),
    ] {
        assert!(sum <= 1, "{sum}");
    }
    assert_eq!(r.accessibility_table[&Verdict::Accessible], 1);
    assert_eq!(r.failure_table[&FailureCause::ClientError], 1);
    audit_internal_consistency(&r).unwrap();
}

#[test]
fn label_mismatch_is_rejected() {
    let c = corpus(&["x"]);
    let (mut p, k, s) = empty_inputs("first");
    p.snapshot_label = "revisit".into();
    let err = build_report(&c, &[], &p, &k, &s).unwrap_err();
    assert_eq!(
        err,
        ReportError::LabelMismatch {
            stage: "probe",
            found: "revisit".into(),
            expected: "first".into()
        }
    );
}

#[test]
fn recount_matches_and_render_is_stable() {
    let c = corpus(&["a", "b", "c", "d"]);
    let ids: Vec<PluginId> = c.records.iter().map(|r| r.plugin_id.clone()).collect();
    let verdicts = vec![
        verdict(&ids[0], Verdict::Accessible),
        verdict(&ids[1], Verdict::Accessible),
        verdict(&ids[2], Verdict::HiddenRedirect),
        verdict(&ids[3], Verdict::NativeUnreachable),
    ];
    let (mut p, mut k, s) = empty_inputs("first");
    p.plugins.push(probe(
        &ids[0],
        AuthType::ServiceBearer,
        TokenCase::Case2,
        &[FailureCause::LackAuthorization, FailureCause::RateLimited],
    ));
    p.plugins.push(probe(&ids[1], AuthType::None, TokenCase::Case4, &[]));
    k.run.discrepancies = DiscrepancySet {
        findings: vec![ConsistencyFinding {
            plugin_id: ids[0].clone(),
            kind: FindingKind::InconsistentName,
            evidence: Evidence::Pair {
                field: "name_for_human".into(),
                store: "a".into(),
                manifest: "A!".into(),
            },
        }],
        per_developer: BTreeMap::from([("unknown".into(), 1)]),
    };
    let r = build_report(&c, &verdicts, &p, &k, &s).unwrap();
    audit_internal_consistency(&r).unwrap();
    assert_eq!(r.failure_table[&FailureCause::LackAuthorization], 1);
    assert_eq!(r.probe_summary.failed_endpoints, 2);
    assert_eq!(r.metrics[METRIC_FILE_LEAKAGE], 2);
    assert_eq!(r.metrics[METRIC_INCONSISTENT_DATA], 1);
    assert_eq!(r.metrics[METRIC_NO_TOKEN_VALID], 1);
    assert_eq!(render_report(&r, Format::Json), render_report(&r, Format::Json));

    let mut tampered = r.clone();
    *tampered.case_table.get_mut(&TokenCase::Case4).unwrap() += 1;
    assert!(audit_internal_consistency(&tampered).is_err());
}

fn with_metrics(pairs: &[(&str, usize)]) -> AuditReport {
    let c = corpus(&[]);
    let (p, k, s) = empty_inputs("first");
    let mut r = build_report(&c, &[], &p, &k, &s).unwrap();
    r.metrics = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    r
}

#[test]
fn diff_values() {
    let before = with_metrics(&[
        (METRIC_FILE_LEAKAGE, 368),
        (METRIC_INCONSISTENT_DATA, 69),
        (METRIC_NO_TOKEN_VALID, 141),
        (METRIC_OAUTH_VALID, 27),
        (METRIC_BEARER_VALID, 5),
        ("extra", 0),
    ]);
    let after = with_metrics(&[
        (METRIC_FILE_LEAKAGE, 282),
        (METRIC_INCONSISTENT_DATA, 61),
        (METRIC_NO_TOKEN_VALID, 89),
        (METRIC_OAUTH_VALID, 17),
        (METRIC_BEARER_VALID, 3),
        ("extra", 4),
    ]);
    let d = diff_reports(&before, &after);
    let names: Vec<&str> = d.metrics.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(&names[..5], &HEADLINE_METRICS);
    let rendered: Vec<String> = d.metrics.iter().map(MetricDiff::rendered_change).collect();
    assert_eq!(rendered, vec!["-23.4%", "-11.6%", "-36.9%", "-37.0%", "-40.0%", "n/a"]);
    let printed = [-23.4, -11.6, -36.9, -37.03, -40.00];
    for (m, p) in d.metrics.iter().zip(printed) {
        assert!((m.change_pct.unwrap() - p).abs() <= 0.1, "{} {p}", m.name);
    }
    let same = diff_reports(&before, &before);
    assert!(same.metrics.iter().all(|m| m.change_pct.is_none_or(|c| c == 0.0)));
    let md = String::from_utf8(render_diff(&d, Format::Markdown)).unwrap();
    assert!(md.contains("| file_leakage | 368 | 282 | -23.4% |"));
}

#[test]
fn format_parsing() {
    assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
    assert_eq!("Markdown".parse::<Format>().unwrap(), Format::Markdown);
    assert!("html".parse::<Format>().is_err());
}
