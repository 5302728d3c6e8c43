//! OAuth scope risk categorization.
//!
//! Scope strings are tokenized, embedded as TF-IDF vectors over the corpus
//! plus a labelled seed set, and each scope takes the category of its most
//! similar seed document.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use url::Url;

use crate::corpus::PluginId;
use crate::manifest::{AuthType, ManifestDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskCategory {
    GlobalAccess,
    ReadWrite,
    OpenAIPlatform,
    IdentityEmail,
    ProjectTask,
    ExecuteActions,
    Unspecified,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; 7] = [
        RiskCategory::GlobalAccess,
        RiskCategory::ReadWrite,
        RiskCategory::OpenAIPlatform,
        RiskCategory::IdentityEmail,
        RiskCategory::ProjectTask,
        RiskCategory::ExecuteActions,
        RiskCategory::Unspecified,
    ];

    /// Tie-break order, most severe first.
    pub const PRECEDENCE: [RiskCategory; 6] = [
        RiskCategory::GlobalAccess,
        RiskCategory::ExecuteActions,
        RiskCategory::IdentityEmail,
        RiskCategory::ReadWrite,
        RiskCategory::ProjectTask,
        RiskCategory::OpenAIPlatform,
    ];

    fn precedence_rank(self) -> usize {
        Self::PRECEDENCE
            .iter()
            .position(|c| *c == self)
            .unwrap_or(Self::PRECEDENCE.len())
    }

    pub fn label(self) -> &'static str {
        match self {
            RiskCategory::GlobalAccess => "Global/broad access",
            RiskCategory::ReadWrite => "Read-write",
            RiskCategory::OpenAIPlatform => "OpenAI platform",
            RiskCategory::IdentityEmail => "Identity and email",
            RiskCategory::ProjectTask => "Project and task management",
            RiskCategory::ExecuteActions => "Execute actions",
            RiskCategory::Unspecified => "Unspecified or empty",
        }
    }
}

/// Splits on whitespace, `+` and `,`; URL scopes contribute their host and
/// last path segment. Lowercased, empties dropped, duplicates kept.
pub fn tokenize_scope(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in raw.split(|c: char| c.is_whitespace() || c == '+' || c == ',') {
        if piece.is_empty() {
            continue;
        }
        match Url::parse(piece) {
            Ok(url) if url.host_str().is_some() && matches!(url.scheme(), "http" | "https") => {
                out.push(url.host_str().unwrap_or_default().to_lowercase());
                if let Some(last) = url.path_segments().and_then(|mut s| s.rfind(|x| !x.is_empty())) {
                    out.push(last.to_lowercase());
                }
            }
            _ => out.push(piece.to_lowercase()),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeDocument {
    pub plugin_id: PluginId,
    pub raw_scope: String,
    pub tokens: Vec<String>,
}

impl ScopeDocument {
    pub fn new(plugin_id: PluginId, raw_scope: &str) -> Self {
        ScopeDocument {
            plugin_id,
            raw_scope: raw_scope.to_string(),
            tokens: tokenize_scope(raw_scope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TfidfVector {
    pub weights: BTreeMap<String, f64>,
}

impl TfidfVector {
    pub fn norm(&self) -> f64 {
        self.weights.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.values().all(|w| *w == 0.0)
    }
}

/// Smoothed inverse document frequencies over a token-list corpus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TfidfContext {
    pub n_docs: usize,
    pub idf: BTreeMap<String, f64>,
}

impl TfidfContext {
    pub fn fit(docs: &[&[String]]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in docs {
            for t in d.iter().collect::<BTreeSet<_>>() {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let n = docs.len();
        let idf = df
            .into_iter()
            .map(|(t, f)| (t, ((1.0 + n as f64) / (1.0 + f as f64)).ln() + 1.0))
            .collect();
        TfidfContext { n_docs: n, idf }
    }

    fn idf_of(&self, token: &str) -> f64 {
        // unseen terms behave as if df = 0
        self.idf
            .get(token)
            .copied()
            .unwrap_or_else(|| (1.0 + self.n_docs as f64).ln() + 1.0)
    }

    /// L2-normalized tf-idf vector; tf is count over document length.
    pub fn vectorize(&self, tokens: &[String]) -> TfidfVector {
        if tokens.is_empty() {
            return TfidfVector::default();
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let len = tokens.len() as f64;
        let mut weights: BTreeMap<String, f64> = counts
            .into_iter()
            .map(|(t, c)| (t.to_string(), c as f64 / len * self.idf_of(t)))
            .collect();
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            weights.values_mut().for_each(|w| *w /= norm);
        }
        TfidfVector { weights }
    }
}

pub fn tfidf_vectorize(docs: &[ScopeDocument]) -> Vec<TfidfVector> {
    let lists: Vec<&[String]> = docs.iter().map(|d| d.tokens.as_slice()).collect();
    let ctx = TfidfContext::fit(&lists);
    docs.iter().map(|d| ctx.vectorize(&d.tokens)).collect()
}

pub fn cosine_similarity(a: &TfidfVector, b: &TfidfVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .weights
        .iter()
        .filter_map(|(t, w)| b.weights.get(t).map(|v| w * v))
        .sum();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Labelled seed material: single-term lexicons plus whole exemplar scopes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLexicon {
    pub terms: BTreeMap<RiskCategory, Vec<String>>,
    pub exemplars: Vec<(String, RiskCategory)>,
}

impl Default for SeedLexicon {
    fn default() -> Self {
        use RiskCategory::*;
        let words = |ws: &[&str]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>();
        let terms = BTreeMap::from([
            (
                GlobalAccess,
                words(&["all", "full-access", "baas-full-access", "global"]),
            ),
            (ReadWrite, words(&["read", "write", "offline_access"])),
            (OpenAIPlatform, words(&["openai", "oai11", "chatgpt"])),
            (
                IdentityEmail,
                words(&["email", "profile", "openid", "w_member_social", "user-read-email"]),
            ),
            (ProjectTask, words(&["project", "manage_library", "basic_access"])),
            (ExecuteActions, words(&["nla:exposed_actions", "actions"])),
        ]);
        let exemplars = [
            ("all", GlobalAccess),
            ("baas-full-access", GlobalAccess),
            ("read+write", ReadWrite),
            ("read write read offline_access", ReadWrite),
            ("openai", OpenAIPlatform),
            ("oai11/global", OpenAIPlatform),
            ("openid email https://openai.videoinsights.io/all", OpenAIPlatform),
            ("email", IdentityEmail),
            ("profile", IdentityEmail),
            ("w_member_social openid profile email", IdentityEmail),
            ("openid offline_access", IdentityEmail),
            ("playlist-modify-public user-read-email", IdentityEmail),
            ("project", ProjectTask),
            ("basic_access email offline_access manage_library", ProjectTask),
            ("nla:exposed_actions", ExecuteActions),
        ]
        .into_iter()
        .map(|(s, c)| (s.to_string(), c))
        .collect();
        SeedLexicon { terms, exemplars }
    }
}

impl SeedLexicon {
    fn seed_docs(&self) -> Vec<(Vec<String>, RiskCategory, String)> {
        let mut out = Vec::new();
        for (cat, terms) in &self.terms {
            for t in terms {
                out.push((vec![t.to_lowercase()], *cat, t.clone()));
            }
        }
        for (s, cat) in &self.exemplars {
            out.push((tokenize_scope(s), *cat, s.clone()));
        }
        out
    }
}

/// Vectorization context over corpus and seed documents, with the seed
/// vectors precomputed.
pub struct CategorizationContext {
    pub tfidf: TfidfContext,
    seeds: Vec<(TfidfVector, RiskCategory, String)>,
}

impl CategorizationContext {
    pub fn build(corpus: &[ScopeDocument], lexicon: &SeedLexicon) -> Self {
        let seed_docs = lexicon.seed_docs();
        let mut lists: Vec<&[String]> = corpus.iter().map(|d| d.tokens.as_slice()).collect();
        lists.extend(seed_docs.iter().map(|(t, _, _)| t.as_slice()));
        let tfidf = TfidfContext::fit(&lists);
        let seeds = seed_docs
            .into_iter()
            .map(|(tokens, cat, label)| (tfidf.vectorize(&tokens), cat, label))
            .collect();
        CategorizationContext { tfidf, seeds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorization {
    pub category: RiskCategory,
    pub similarity: f64,
    pub matched_seed: Option<String>,
}

pub fn categorize_scope(doc: &ScopeDocument, ctx: &CategorizationContext) -> Categorization {
    let unspecified = Categorization {
        category: RiskCategory::Unspecified,
        similarity: 0.0,
        matched_seed: None,
    };
    if doc.tokens.is_empty() {
        return unspecified;
    }
    let v = ctx.tfidf.vectorize(&doc.tokens);
    let mut best: Option<(f64, RiskCategory, &str)> = None;
    for (seed, cat, label) in &ctx.seeds {
        let s = cosine_similarity(&v, seed);
        let better = match best {
            None => s > 0.0,
            Some((bs, bc, _)) => s > bs || (s == bs && cat.precedence_rank() < bc.precedence_rank()),
        };
        if better {
            best = Some((s, *cat, label));
        }
    }
    match best {
        Some((similarity, category, label)) => Categorization {
            category,
            similarity,
            matched_seed: Some(label.to_string()),
        },
        None => unspecified,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub count: usize,
    /// Percentage of all assignments, full precision.
    pub share_pct: f64,
}

impl CategoryShare {
    pub fn rendered(&self) -> String {
        format!("{:.3}%", self.share_pct)
    }
}

/// Count and share per category; zero-filled for nonempty input, empty otherwise.
pub fn distribution_report(assignments: &[(PluginId, RiskCategory)]) -> BTreeMap<RiskCategory, CategoryShare> {
    if assignments.is_empty() {
        return BTreeMap::new();
    }
    let total = assignments.len() as f64;
    RiskCategory::ALL
        .into_iter()
        .map(|c| {
            let count = assignments.iter().filter(|(_, a)| *a == c).count();
            (
                c,
                CategoryShare {
                    count,
                    share_pct: count as f64 / total * 100.0,
                },
            )
        })
        .collect()
}

/// Single-linkage grouping of documents whose pairwise similarity reaches
/// `threshold`; returns groups of document indices.
pub fn cluster_by_similarity(vectors: &[TfidfVector], threshold: f64) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..vectors.len()).collect();
    fn root(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if cosine_similarity(&vectors[i], &vectors[j]) >= threshold {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..vectors.len() {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeAssignment {
    pub document: ScopeDocument,
    pub categorization: Categorization,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScopeRun {
    pub assignments: Vec<ScopeAssignment>,
    pub distribution: BTreeMap<RiskCategory, CategoryShare>,
}

/// Categorizes the scope of every OAuth manifest.
pub fn run_scopes(manifests: &BTreeMap<PluginId, ManifestDocument>, lexicon: &SeedLexicon) -> ScopeRun {
    let docs: Vec<ScopeDocument> = manifests
        .iter()
        .filter(|(_, m)| m.auth.auth_type == AuthType::OAuth)
        .map(|(id, m)| ScopeDocument::new(id.clone(), m.auth.scope.as_deref().unwrap_or("")))
        .collect();
    let ctx = CategorizationContext::build(&docs, lexicon);
    let assignments: Vec<ScopeAssignment> = docs
        .into_iter()
        .map(|d| {
            let categorization = categorize_scope(&d, &ctx);
            ScopeAssignment {
                document: d,
                categorization,
            }
        })
        .collect();
    let pairs: Vec<(PluginId, RiskCategory)> = assignments
        .iter()
        .map(|a| (a.document.plugin_id.clone(), a.categorization.category))
        .collect();
    ScopeRun {
        distribution: distribution_report(&pairs),
        assignments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    fn doc(raw: &str) -> ScopeDocument {
        ScopeDocument::new(PluginId("p".into()), raw)
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize_scope("read+write"), toks(&["read", "write"]));
        assert!(tokenize_scope("").is_empty());
        assert_eq!(
            tokenize_scope("openid email https://openai.videoinsights.io/all"),
            toks(&["openid", "email", "openai.videoinsights.io", "all"])
        );
        assert_eq!(tokenize_scope("Read, WRITE  read"), toks(&["read", "write", "read"]));
    }

    #[test]
    fn toy_corpus_oracle() {
        let docs = [doc("read write"), doc("read"), doc("email")];
        let v = tfidf_vectorize(&docs);
        // idf(read) = ln(4/3)+1, idf(write) = idf(email) = ln 2 + 1; equal tf
        // within doc 0 so the normalized weights are idf / hypot(idf_r, idf_w)
        let read0 = 0.6053485081062916;
        let write0 = 0.7959605415681652;
        assert!((v[0].weights["read"] - read0).abs() < 1e-9);
        assert!((v[0].weights["write"] - write0).abs() < 1e-9);
        assert!((v[1].weights["read"] - 1.0).abs() < 1e-9);
        assert!((v[2].weights["email"] - 1.0).abs() < 1e-9);
        assert!((cosine_similarity(&v[0], &v[1]) - read0).abs() < 1e-9);
        assert_eq!(cosine_similarity(&v[0], &v[2]), 0.0);

        let ctx = TfidfContext::fit(&[&docs[0].tokens, &docs[1].tokens, &docs[2].tokens]);
        assert!((ctx.idf["read"] - 1.2876820724517808).abs() < 1e-9);
        assert!((ctx.idf["write"] - 1.6931471805599454).abs() < 1e-9);
        assert!(ctx.idf["write"] > ctx.idf["read"]);
    }

    #[test]
    fn identical_docs_identical_vectors() {
        let v = tfidf_vectorize(&[doc("read write"), doc("read write")]);
        assert_eq!(v[0], v[1]);
        assert!(tfidf_vectorize(&[doc("")])[0].is_zero());
    }

    #[test]
    fn cosine_hand_oracle() {
        let v = |pairs: &[(&str, f64)]| TfidfVector {
            weights: pairs.iter().map(|(k, w)| (k.to_string(), *w)).collect(),
        };
        assert!((cosine_similarity(&v(&[("x", 3.0), ("y", 4.0)]), &v(&[("x", 1.0)])) - 0.6).abs() < 1e-9);
        assert!((cosine_similarity(&v(&[("x", 1.0), ("y", 2.0)]), &v(&[("x", 2.0), ("y", 1.0)])) - 0.8).abs() < 1e-9);
        let a = v(&[("x", 0.3), ("z", 2.0)]);
        assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&a, &TfidfVector::default()), 0.0);
    }

    #[test]
    fn quoted_exemplars_map_to_their_categories() {
        let lex = SeedLexicon::default();
        let corpus: Vec<ScopeDocument> = lex.exemplars.iter().map(|(s, _)| doc(s)).collect();
        let ctx = CategorizationContext::build(&corpus, &lex);
        for (s, expected) in &lex.exemplars {
            assert_eq!(categorize_scope(&doc(s), &ctx).category, *expected, "{s}");
        }
        // literal table, independent of the lexicon
        use RiskCategory::*;
        for (s, expected) in [
            ("all", GlobalAccess),
            ("email", IdentityEmail),
            ("nla:exposed_actions", ExecuteActions),
            ("read+write", ReadWrite),
            ("oai11/global", OpenAIPlatform),
            ("project", ProjectTask),
            ("", Unspecified),
            ("zzz unknown", Unspecified),
        ] {
            assert_eq!(categorize_scope(&doc(s), &ctx).category, expected, "{s:?}");
        }
    }

    #[test]
    fn distribution_shares() {
        let mut a: Vec<(PluginId, RiskCategory)> = (0..9)
            .map(|i| (PluginId(format!("g{i}")), RiskCategory::GlobalAccess))
            .collect();
        a.extend((0..62).map(|i| (PluginId(format!("u{i}")), RiskCategory::Unspecified)));
        let d = distribution_report(&a);
        assert_eq!(d[&RiskCategory::GlobalAccess].rendered(), "12.676%");
        assert!((d[&RiskCategory::GlobalAccess].share_pct - 12.675).abs() <= 0.01);
        let all_u: Vec<_> = (0..3)
            .map(|i| (PluginId(format!("{i}")), RiskCategory::Unspecified))
            .collect();
        assert_eq!(distribution_report(&all_u)[&RiskCategory::Unspecified].share_pct, 100.0);
        assert!(distribution_report(&[]).is_empty());
    }

    #[test]
    fn clustering_threshold() {
        let v = tfidf_vectorize(&[doc("read write"), doc("write read"), doc("email")]);
        assert_eq!(cluster_by_similarity(&v, 0.6), vec![vec![0, 1], vec![2]]);
    }

    fn vocab() -> Vec<&'static str> {
        vec![
            "read",
            "write",
            "email",
            "profile",
            "all",
            "project",
            "openai",
            "actions",
            "x1",
            "y2",
            "offline_access",
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn argmax_invariant_under_count_scaling(
            corpus in prop::collection::vec(prop::collection::vec(prop::sample::select(vocab()), 1..5), 1..8),
            k in 2usize..6,
        ) {
            let lex = SeedLexicon::default();
            let docs: Vec<ScopeDocument> = corpus.iter().map(|t| doc(&t.join(" "))).collect();
            let scaled: Vec<ScopeDocument> = corpus
                .iter()
                .map(|t| doc(&t.iter().flat_map(|w| std::iter::repeat_n(*w, k)).collect::<Vec<_>>().join(" ")))
                .collect();
            let c1 = CategorizationContext::build(&docs, &lex);
            let c2 = CategorizationContext::build(&scaled, &lex);
            for (a, b) in docs.iter().zip(&scaled) {
                prop_assert_eq!(categorize_scope(a, &c1).category, categorize_scope(b, &c2).category);
            }
        }

        #[test]
        fn cosine_bounds_and_symmetry(a in prop::collection::vec(prop::sample::select(vocab()), 0..6),
                                      b in prop::collection::vec(prop::sample::select(vocab()), 0..6)) {
            let docs = [doc(&a.join(" ")), doc(&b.join(" "))];
            let v = tfidf_vectorize(&docs);
            let s = cosine_similarity(&v[0], &v[1]);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((s - cosine_similarity(&v[1], &v[0])).abs() < 1e-15);
            prop_assert!(v.iter().all(|x| x.weights.values().all(|w| *w >= 0.0)));
        }
    }
}
