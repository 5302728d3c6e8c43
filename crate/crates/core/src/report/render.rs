//! JSON and markdown renderings of reports and diffs.

use std::fmt::Write;
use std::str::FromStr;

use super::{AuditReport, ReportDiff};
use crate::canonical::to_canonical_json;
use crate::consistency::FindingKind;
use crate::discovery::Verdict;
use crate::probe::{FailureCause, TokenCase, TokenFamily};
use crate::scoperisk::RiskCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown report format {0:?} (expected json or markdown)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

pub fn render_report(report: &AuditReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_canonical_json(report).expect("report serializes").into_bytes(),
        Format::Markdown => markdown_report(report).into_bytes(),
    }
}

pub fn render_diff(diff: &ReportDiff, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_canonical_json(diff).expect("diff serializes").into_bytes(),
        Format::Markdown => markdown_diff(diff).into_bytes(),
    }
}

fn table(out: &mut String, title: &str, headers: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| {} |", headers.join(" | "));
    let _ = writeln!(out, "|{}|", headers.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn case_bits(c: TokenCase) -> [&'static str; 3] {
    match c {
        TokenCase::Case1 => ["1", "1", "1"],
        TokenCase::Case2 => ["1", "0/1", "0"],
        TokenCase::Case3 => ["1", "0", "1"],
        TokenCase::Case4 => ["0", "-", "1"],
        TokenCase::Case5 => ["0", "-", "0"],
    }
}

fn cause_label(c: FailureCause) -> &'static str {
    match c {
        FailureCause::LackAuthorization => "Lack authorization",
        FailureCause::ClientError => "Client errors",
        FailureCause::RateLimited => "Rate limiting",
        FailureCause::NoFailure => "None",
    }
}

fn family_label(f: TokenFamily) -> &'static str {
    match f {
        TokenFamily::NoToken => "No token",
        TokenFamily::OAuth => "OAuth",
        TokenFamily::Bearer => "Bearer",
        TokenFamily::UserBearer => "User bearer",
    }
}

fn markdown_report(r: &AuditReport) -> String {
    let mut out = format!(
        "# Audit report: {}\n\nPlugins in corpus: {}\n\n",
        r.snapshot_label, r.corpus_size
    );

    let mut rows: Vec<Vec<String>> = Verdict::ALL
        .iter()
        .filter_map(|v| {
            r.accessibility_table
                .get(v)
                .map(|n| vec![v.label().to_string(), n.to_string()])
        })
        .collect();
    if !rows.is_empty() {
        rows.push(vec![
            "Total".into(),
            r.accessibility_table.values().sum::<usize>().to_string(),
        ]);
    }
    table(&mut out, "Accessibility of URLs", &["Category", "Plugins"], &rows);

    let rows: Vec<Vec<String>> = TokenCase::ALL
        .iter()
        .filter_map(|c| {
            r.case_table.get(c).map(|n| {
                let [tr, tv, o] = case_bits(*c);
                vec![
                    format!("{c:?}"),
                    tr.into(),
                    tv.into(),
                    o.into(),
                    c.description().into(),
                    n.to_string(),
                ]
            })
        })
        .collect();
    table(
        &mut out,
        "Analysis of API request cases",
        &["Case", "Tr", "Tv", "O", "Meaning", "Plugins"],
        &rows,
    );

    let s = &r.probe_summary;
    let _ = writeln!(
        out,
        "Probeable plugins: {}; returned valid data: {}; no valid data: {}; failed endpoints: {}; server-side failures: {}; unprobeable: {}\n",
        s.probeable,
        s.retrieved_data,
        s.no_valid_data,
        s.failed_endpoints,
        s.server_side_failures,
        s.unprobeable.values().sum::<usize>()
    );

    let rows: Vec<Vec<String>> = FailureCause::FAILURES
        .iter()
        .filter_map(|c| {
            r.failure_table
                .get(c)
                .map(|n| vec![cause_label(*c).into(), n.to_string()])
        })
        .collect();
    table(&mut out, "Failed requests", &["Cause", "Endpoints"], &rows);

    let rows: Vec<Vec<String>> = TokenFamily::ALL
        .iter()
        .filter_map(|f| {
            r.token_type_summary.get(f).map(|st| {
                vec![
                    family_label(*f).into(),
                    st.total.to_string(),
                    st.succeeded.to_string(),
                    st.failed.to_string(),
                    st.rendered_rate(),
                ]
            })
        })
        .collect();
    table(
        &mut out,
        "Token types",
        &["Token type", "Total", "Succeeded", "Failed", "Success rate"],
        &rows,
    );

    let mut rows: Vec<Vec<String>> = [
        FindingKind::InconsistentName,
        FindingKind::DifferentDescription,
        FindingKind::MismatchedLegalUrl,
        FindingKind::SharedManifestGroup,
        FindingKind::QuantifierPrefix,
    ]
    .iter()
    .filter_map(|k| {
        r.consistency_table.get(k).map(|n| {
            let strict = r
                .consistency_strict_table
                .get(k)
                .map_or("-".to_string(), |x| x.to_string());
            vec![k.label().into(), n.to_string(), strict]
        })
    })
    .collect();
    if !rows.is_empty() {
        rows.push(vec![
            "Plugins with inconsistent metadata".into(),
            r.inconsistent_plugins.to_string(),
            r.inconsistent_plugins_strict.to_string(),
        ]);
    }
    table(
        &mut out,
        "Inconsistencies in plugin metadata",
        &["Kind", "Plugins", "Plugins (strict)"],
        &rows,
    );

    let rows: Vec<Vec<String>> = r
        .shared_manifest_groups
        .iter()
        .map(|g| vec![format!("{:?}", g.basis), g.size.to_string(), g.members[0].to_string()])
        .collect();
    table(
        &mut out,
        "Shared manifest groups",
        &["Basis", "Members", "First member"],
        &rows,
    );

    let rows: Vec<Vec<String>> = RiskCategory::ALL
        .iter()
        .filter_map(|c| {
            r.scope_distribution
                .get(c)
                .map(|s| vec![c.label().into(), s.count.to_string(), s.rendered()])
        })
        .collect();
    table(
        &mut out,
        "OAuth scope distribution",
        &["Category", "Plugins", "Share"],
        &rows,
    );
    out
}

fn markdown_diff(d: &ReportDiff) -> String {
    let mut out = format!("# Comparison: {} vs {}\n\n", d.before_label, d.after_label);
    let rows: Vec<Vec<String>> = d
        .metrics
        .iter()
        .map(|m| {
            vec![
                m.name.clone(),
                m.before.to_string(),
                m.after.to_string(),
                m.rendered_change(),
            ]
        })
        .collect();
    table(
        &mut out,
        "Exposure before and after",
        &["Metric", "Before", "After", "Change"],
        &rows,
    );
    out
}
