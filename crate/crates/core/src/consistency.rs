//! Metadata consistency and integrity checks.
//!
//! Store listings are compared with the manifests they point to; manifests
//! shared across listings, colliding model names and alphabetical
//! rank-gaming prefixes are reported as well.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PluginId, PluginRecord};
use crate::domain::normalized_url_key;
use crate::manifest::{manifest_fingerprint, ManifestDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    InconsistentName,
    DifferentDescription,
    MismatchedLegalUrl,
    SharedManifestGroup,
    QuantifierPrefix,
}

impl FindingKind {
    /// Kinds comparing a listing with its own manifest.
    pub const METADATA: [FindingKind; 3] = [
        FindingKind::InconsistentName,
        FindingKind::DifferentDescription,
        FindingKind::MismatchedLegalUrl,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FindingKind::InconsistentName => "Inconsistent names",
            FindingKind::DifferentDescription => "Different descriptions",
            FindingKind::MismatchedLegalUrl => "Mismatched legal document URLs",
            FindingKind::SharedManifestGroup => "Shared manifest groups",
            FindingKind::QuantifierPrefix => "Quantifier name prefixes",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupBasis {
    Fingerprint,
    NameForModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Pair {
        field: String,
        store: String,
        manifest: String,
    },
    Group {
        basis: GroupBasis,
        key: String,
        members: Vec<PluginId>,
    },
    Prefix {
        name: String,
        prefix: String,
        remainder: String,
        twin: Option<PluginId>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyFinding {
    pub plugin_id: PluginId,
    pub kind: FindingKind,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    /// Trimmed, whitespace-collapsed, case-folded comparison.
    Normalized,
    /// Raw string equality.
    Strict,
}

pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn consistency_match(d_api: &str, d_db: &str) -> bool {
    normalize(d_api) == normalize(d_db)
}

pub fn strict_match(d_api: &str, d_db: &str) -> bool {
    d_api == d_db
}

fn matches(mode: MatchMode, a: &str, b: &str) -> bool {
    match mode {
        MatchMode::Normalized => consistency_match(a, b),
        MatchMode::Strict => strict_match(a, b),
    }
}

/// Human and model names are compared on case-folded alphanumerics, so a
/// model name that only drops spaces or punctuation is accepted.
fn model_name_key(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn pair(record: &PluginRecord, kind: FindingKind, field: &str, store: &str, manifest: &str) -> ConsistencyFinding {
    ConsistencyFinding {
        plugin_id: record.plugin_id.clone(),
        kind,
        evidence: Evidence::Pair {
            field: field.into(),
            store: store.into(),
            manifest: manifest.into(),
        },
    }
}

pub fn detect_inconsistencies(record: &PluginRecord, manifest: &ManifestDocument) -> Vec<ConsistencyFinding> {
    detect_inconsistencies_with(record, manifest, MatchMode::Normalized)
}

pub fn detect_inconsistencies_with(
    record: &PluginRecord,
    manifest: &ManifestDocument,
    mode: MatchMode,
) -> Vec<ConsistencyFinding> {
    let mut out = Vec::new();
    let store_name = record.store_name();
    if !matches(mode, store_name, &manifest.name_for_human) {
        out.push(pair(
            record,
            FindingKind::InconsistentName,
            "name_for_human",
            store_name,
            &manifest.name_for_human,
        ));
    }
    let model_differs = match mode {
        MatchMode::Normalized => model_name_key(&manifest.name_for_human) != model_name_key(&manifest.name_for_model),
        MatchMode::Strict => manifest.name_for_human.replace(' ', "") != manifest.name_for_model,
    };
    if model_differs {
        out.push(pair(
            record,
            FindingKind::InconsistentName,
            "name_for_model",
            &manifest.name_for_human,
            &manifest.name_for_model,
        ));
    }
    if let (Some(store), Some(man)) = (&record.store_description, &manifest.description_for_human) {
        if !matches(mode, store, man) {
            out.push(pair(
                record,
                FindingKind::DifferentDescription,
                "description_for_human",
                store,
                man,
            ));
        }
    }
    if let (Some(store), Some(man)) = (&record.legal_info_url, &manifest.legal_info_url) {
        let differs = match mode {
            MatchMode::Normalized => normalized_url_key(store) != normalized_url_key(man),
            MatchMode::Strict => store != man,
        };
        if differs {
            out.push(pair(
                record,
                FindingKind::MismatchedLegalUrl,
                "legal_info_url",
                store.as_str(),
                man.as_str(),
            ));
        }
    }
    out
}

/// One finding per fingerprint class of two or more plugins, plus one per
/// `name_for_model` shared by plugins whose manifests otherwise differ.
pub fn detect_shared_manifests(manifests: &BTreeMap<PluginId, ManifestDocument>) -> Vec<ConsistencyFinding> {
    let mut by_fp: BTreeMap<String, Vec<PluginId>> = BTreeMap::new();
    let mut by_model: BTreeMap<&str, Vec<(PluginId, String)>> = BTreeMap::new();
    for (id, m) in manifests {
        let fp = manifest_fingerprint(m).0;
        by_fp.entry(fp.clone()).or_default().push(id.clone());
        by_model
            .entry(m.name_for_model.as_str())
            .or_default()
            .push((id.clone(), fp));
    }
    let group = |basis, key: String, members: Vec<PluginId>| ConsistencyFinding {
        plugin_id: members[0].clone(),
        kind: FindingKind::SharedManifestGroup,
        evidence: Evidence::Group { basis, key, members },
    };
    let mut out: Vec<ConsistencyFinding> = by_fp
        .into_iter()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(fp, members)| group(GroupBasis::Fingerprint, fp, members))
        .collect();
    for (name, members) in by_model {
        let fps: BTreeSet<&String> = members.iter().map(|(_, fp)| fp).collect();
        if members.len() >= 2 && fps.len() >= 2 {
            out.push(group(
                GroupBasis::NameForModel,
                name.to_string(),
                members.into_iter().map(|(id, _)| id).collect(),
            ));
        }
    }
    out.sort_by(|a, b| (&a.plugin_id, a.evidence_key()).cmp(&(&b.plugin_id, b.evidence_key())));
    out
}

impl ConsistencyFinding {
    fn evidence_key(&self) -> String {
        serde_json::to_string(&self.evidence).unwrap_or_default()
    }
}

/// Leading tokens treated as meaningless quantifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixLexicon {
    pub tokens: Vec<String>,
}

impl Default for PrefixLexicon {
    fn default() -> Self {
        PrefixLexicon {
            tokens: ["A", "An", "AA", "AAA"].into_iter().map(String::from).collect(),
        }
    }
}

impl PrefixLexicon {
    fn hit(&self, token: &str) -> bool {
        let repeated_a = token.len() <= 3 && token.chars().all(|c| c == 'a' || c == 'A');
        !token.is_empty() && (repeated_a || self.tokens.iter().any(|t| t == token))
    }
}

fn well_formed_title(s: &str) -> bool {
    let words: Vec<&str> = s.split_whitespace().collect();
    !words.is_empty()
        && words.iter().all(|w| {
            let mut chars = w.chars();
            chars.next().is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
                && w.chars().all(|c| c.is_alphanumeric() || "-'&.".contains(c))
        })
}

pub fn detect_rank_gaming(names: &[(PluginId, String)], lexicon: &PrefixLexicon) -> Vec<ConsistencyFinding> {
    let index: BTreeMap<String, &PluginId> = names.iter().map(|(id, n)| (normalize(n), id)).collect();
    let mut out = Vec::new();
    for (id, name) in names {
        let trimmed = name.trim();
        let Some((prefix, rest)) = trimmed.split_once(char::is_whitespace) else {
            continue;
        };
        let remainder = rest.trim();
        if !lexicon.hit(prefix) || remainder.is_empty() {
            continue;
        }
        let twin = index
            .get(&normalize(remainder))
            .filter(|t| **t != id)
            .map(|t| (*t).clone());
        if twin.is_some() || well_formed_title(remainder) {
            out.push(ConsistencyFinding {
                plugin_id: id.clone(),
                kind: FindingKind::QuantifierPrefix,
                evidence: Evidence::Prefix {
                    name: name.clone(),
                    prefix: prefix.to_string(),
                    remainder: remainder.to_string(),
                    twin,
                },
            });
        }
    }
    out
}

pub const UNKNOWN_DEVELOPER: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiscrepancySet {
    pub findings: Vec<ConsistencyFinding>,
    pub per_developer: BTreeMap<String, usize>,
}

pub fn aggregate_discrepancies(findings: Vec<ConsistencyFinding>, corpus: &Corpus) -> DiscrepancySet {
    let mut per_developer = BTreeMap::new();
    for f in &findings {
        let dev = corpus
            .get(&f.plugin_id)
            .and_then(|r| r.developer_domain.clone())
            .unwrap_or_else(|| UNKNOWN_DEVELOPER.to_string());
        *per_developer.entry(dev).or_insert(0) += 1;
    }
    DiscrepancySet {
        findings,
        per_developer,
    }
}

/// Output of the consistency stage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConsistencyRun {
    pub discrepancies: DiscrepancySet,
    /// Listing/manifest findings under raw equality.
    pub strict_findings: Vec<ConsistencyFinding>,
}

pub fn run_consistency(
    corpus: &Corpus,
    manifests: &BTreeMap<PluginId, ManifestDocument>,
    lexicon: &PrefixLexicon,
) -> ConsistencyRun {
    let mut findings = Vec::new();
    let mut strict_findings = Vec::new();
    for (id, m) in manifests {
        if let Some(record) = corpus.get(id) {
            findings.extend(detect_inconsistencies(record, m));
            strict_findings.extend(detect_inconsistencies_with(record, m, MatchMode::Strict));
        }
    }
    findings.extend(detect_shared_manifests(manifests));
    let names: Vec<(PluginId, String)> = corpus
        .records
        .iter()
        .map(|r| (r.plugin_id.clone(), r.store_name().to_string()))
        .collect();
    findings.extend(detect_rank_gaming(&names, lexicon));
    findings.sort_by(|a, b| (&a.plugin_id, a.kind, a.evidence_key()).cmp(&(&b.plugin_id, b.kind, b.evidence_key())));
    ConsistencyRun {
        discrepancies: aggregate_discrepancies(findings, corpus),
        strict_findings,
    }
}

/// Distinct plugins per finding kind (every kind present, zero-filled).
pub fn plugins_per_kind(findings: &[ConsistencyFinding]) -> BTreeMap<FindingKind, usize> {
    let mut sets: BTreeMap<FindingKind, BTreeSet<&PluginId>> = BTreeMap::new();
    for f in findings {
        sets.entry(f.kind).or_default().insert(&f.plugin_id);
    }
    [
        FindingKind::InconsistentName,
        FindingKind::DifferentDescription,
        FindingKind::MismatchedLegalUrl,
        FindingKind::SharedManifestGroup,
        FindingKind::QuantifierPrefix,
    ]
    .into_iter()
    .map(|k| (k, sets.get(&k).map_or(0, BTreeSet::len)))
    .collect()
}

/// Plugins with at least one listing/manifest finding.
pub fn inconsistent_plugins(findings: &[ConsistencyFinding]) -> BTreeSet<PluginId> {
    findings
        .iter()
        .filter(|f| FindingKind::METADATA.contains(&f.kind))
        .map(|f| f.plugin_id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::url_registrable_domain;
    use crate::manifest::parse_manifest;
    use proptest::prelude::*;
    use url::Url;

    fn record(title: &str, legal: Option<&str>, desc: Option<&str>) -> PluginRecord {
        let legal_info_url = legal.map(|l| Url::parse(l).unwrap());
        PluginRecord {
            plugin_id: PluginId::from_listing(title, legal),
            store_title: title.into(),
            name_for_human_store: title.into(),
            store_description: desc.map(String::from),
            developer_domain: legal_info_url.as_ref().and_then(url_registrable_domain),
            legal_info_url,
            logo_url: None,
            flags: vec![],
        }
    }

    fn manifest(human: &str, model: &str, legal: &str, desc: &str) -> ManifestDocument {
        let doc = serde_json::json!({
            "name_for_human": human, "name_for_model": model, "description_for_human": desc,
            "legal_info_url": legal, "api": {"type": "openapi", "url": "https://a.io/openapi.yaml"}
        });
        parse_manifest(doc.to_string().as_bytes()).unwrap()
    }

    #[test]
    fn match_examples() {
        assert!(consistency_match("Digital Pet", "Digital Pet"));
        assert!(!consistency_match("A Digital Pet", "Digital Pet"));
        let padded = "  MixerBox \u{00A0}OnePlayer";
        assert!(consistency_match(padded, "mixerbox oneplayer"));
        assert!(!strict_match(padded, "mixerbox oneplayer"));
        // by hand: trim -> "MixerBox \u{a0}OnePlayer", collapse -> "MixerBox OnePlayer", fold
        assert_eq!(normalize(padded), "mixerbox oneplayer");
    }

    #[test]
    fn matching_pair_yields_nothing() {
        let r = record("Digital Pet", Some("https://a.io/legal"), Some("Feed a pet"));
        let m = manifest("Digital Pet", "DigitalPet", "http://a.io/legal/", "Feed a pet");
        assert!(detect_inconsistencies(&r, &m).is_empty());
        // strict mode sees the scheme/slash difference on the legal URL
        let strict = detect_inconsistencies_with(&r, &m, MatchMode::Strict);
        assert_eq!(strict.len(), 1);
        assert_eq!(strict[0].kind, FindingKind::MismatchedLegalUrl);
    }

    #[test]
    fn each_kind_detected_with_both_sides() {
        let r = record("A Digital Pet", Some("https://a.io/legal"), Some("Feed a pet"));
        let m = manifest("Digital Pet", "pet_sim", "https://a.io/privacy", "A virtual pet");
        let f = detect_inconsistencies(&r, &m);
        let kinds: Vec<_> = f.iter().map(|x| x.kind).collect();
        assert_eq!(
            kinds,
            vec![
                FindingKind::InconsistentName,
                FindingKind::InconsistentName,
                FindingKind::DifferentDescription,
                FindingKind::MismatchedLegalUrl
            ]
        );
        match &f[0].evidence {
            Evidence::Pair { store, manifest, .. } => {
                assert_eq!((store.as_str(), manifest.as_str()), ("A Digital Pet", "Digital Pet"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shared_manifest_group_of_17() {
        let mut ms = BTreeMap::new();
        for i in 0..17 {
            ms.insert(
                PluginId(format!("mb{i:02}")),
                manifest(
                    "MixerBox OnePlayer",
                    "MixerBoxOnePlayer",
                    "https://www.mixerbox.com/terms",
                    "Music",
                ),
            );
        }
        ms.insert(
            PluginId("other".into()),
            manifest("Other", "other", "https://o.io/l", "x"),
        );
        let groups = detect_shared_manifests(&ms);
        assert_eq!(groups.len(), 1);
        match &groups[0].evidence {
            Evidence::Group { basis, members, .. } => {
                assert_eq!(*basis, GroupBasis::Fingerprint);
                assert_eq!(members.len(), 17);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distinct_and_model_name_collisions() {
        let mut ms = BTreeMap::new();
        ms.insert(PluginId("a".into()), manifest("One", "one", "https://a.io/l", "x"));
        ms.insert(PluginId("b".into()), manifest("Two", "two", "https://b.io/l", "y"));
        assert!(detect_shared_manifests(&ms).is_empty());
        ms.insert(PluginId("c".into()), manifest("Uno", "one", "https://c.io/l", "z"));
        let g = detect_shared_manifests(&ms);
        assert_eq!(g.len(), 1);
        assert_eq!(
            g[0].evidence,
            Evidence::Group {
                basis: GroupBasis::NameForModel,
                key: "one".into(),
                members: vec![PluginId("a".into()), PluginId("c".into())]
            }
        );
    }

    #[test]
    fn rank_gaming_examples() {
        let lex = PrefixLexicon::default();
        let names = vec![
            (PluginId("1".into()), "Digital Pet".to_string()),
            (PluginId("2".into()), "A Digital Pet".to_string()),
            (PluginId("3".into()), "Avocado Helper".to_string()),
            (PluginId("4".into()), "a lowercase thing".to_string()),
            (PluginId("5".into()), "AAA Travel Deals".to_string()),
        ];
        let f = detect_rank_gaming(&names, &lex);
        let ids: Vec<_> = f.iter().map(|x| x.plugin_id.0.as_str()).collect();
        assert_eq!(ids, vec!["2", "5"]);
        match &f[0].evidence {
            Evidence::Prefix { twin, .. } => assert_eq!(twin.as_ref().unwrap().0, "1"),
            other => panic!("{other:?}"),
        }
        assert!(detect_rank_gaming(&[], &lex).is_empty());
    }

    #[test]
    fn aggregation_by_developer() {
        let a = record("x", Some("https://a.io/l"), None);
        let b = record("y", Some("https://sub.b.io/l"), None);
        let corpus = Corpus {
            schema_version: 1,
            snapshot_label: "t".into(),
            created_at: chrono::DateTime::from_timestamp(0, 0).unwrap(),
            records: {
                let mut v = vec![a.clone(), b.clone()];
                v.sort_by(|x, y| x.plugin_id.cmp(&y.plugin_id));
                v
            },
            ingest_errors: vec![],
        };
        let mk = |r: &PluginRecord| pair(r, FindingKind::InconsistentName, "f", "s", "m");
        let mut findings = vec![mk(&a), mk(&a), mk(&a), mk(&b), mk(&b)];
        let set = aggregate_discrepancies(findings.clone(), &corpus);
        assert_eq!(
            set.per_developer,
            BTreeMap::from([("a.io".into(), 3), ("b.io".into(), 2)])
        );
        findings.push(ConsistencyFinding {
            plugin_id: PluginId("ghost".into()),
            kind: FindingKind::QuantifierPrefix,
            evidence: Evidence::Prefix {
                name: "A B".into(),
                prefix: "A".into(),
                remainder: "B".into(),
                twin: None,
            },
        });
        let set = aggregate_discrepancies(findings, &corpus);
        assert_eq!(set.per_developer[UNKNOWN_DEVELOPER], 1);
        assert_eq!(set.per_developer.values().sum::<usize>(), set.findings.len());
        assert!(aggregate_discrepancies(vec![], &corpus).per_developer.is_empty());
    }

    proptest! {
        #[test]
        fn match_is_reflexive_and_symmetric(a in "[ \\ta-zA-Z\u{a0}]{0,12}", b in "[ \\ta-zA-Z\u{a0}]{0,12}") {
            prop_assert!(consistency_match(&a, &a));
            prop_assert_eq!(consistency_match(&a, &b), consistency_match(&b, &a));
            prop_assert!(!strict_match(&a, &b) || consistency_match(&a, &b));
        }

        #[test]
        fn fingerprint_groups_are_disjoint(picks in prop::collection::vec(0usize..4, 0..12)) {
            let bodies = [("P", "p"), ("Q", "q"), ("R", "r"), ("S", "s")];
            let ms: BTreeMap<PluginId, ManifestDocument> = picks
                .iter()
                .enumerate()
                .map(|(i, &k)| (PluginId(format!("{i:02}")), manifest(bodies[k].0, bodies[k].1, "https://a.io/l", "d")))
                .collect();
            let mut seen = BTreeSet::new();
            for f in detect_shared_manifests(&ms) {
                if let Evidence::Group { basis: GroupBasis::Fingerprint, members, .. } = f.evidence {
                    for m in members {
                        prop_assert!(seen.insert(m));
                    }
                }
            }
        }
    }
}
