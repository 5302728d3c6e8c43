//! Declarative description of the mock store: listings, served documents
//! and per-endpoint behavior.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use storeaudit_core::consistency::FindingKind;
use storeaudit_core::discovery::Verdict;
use storeaudit_core::manifest::parse_manifest;
use storeaudit_core::probe::{FailureCause, TokenCase, UnprobeableReason};
use storeaudit_core::scoperisk::RiskCategory;

pub const PLAN_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 8787;
pub const WELL_KNOWN_MANIFEST: &str = "/.well-known/ai-plugin.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanProfile {
    PaperTables,
    Revisit,
}

impl PlanProfile {
    pub fn label(self) -> &'static str {
        match self {
            PlanProfile::PaperTables => "first-assessment",
            PlanProfile::Revisit => "revisit",
        }
    }
}

impl std::str::FromStr for PlanProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper-tables" => Ok(PlanProfile::PaperTables),
            "revisit" => Ok(PlanProfile::Revisit),
            other => Err(format!(
                "unknown plan profile {other:?} (expected paper-tables or revisit)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixturePlan {
    pub schema_version: u32,
    pub profile: PlanProfile,
    pub seed: u64,
    pub listen_port: u16,
    pub plugins: Vec<FixturePlugin>,
}

/// What the store index shows for a plugin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreListing {
    pub title: String,
    pub name_for_human: String,
    pub description: Option<String>,
    pub legal_info_url: Option<String>,
    pub logo_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AuthProfile {
    None,
    /// Service-level bearer; endpoints that check tokens accept `required_token`.
    Bearer {
        required_token: String,
    },
    UserBearer,
    /// `issued_token` is what the stub token endpoint hands out.
    OAuth {
        scope: Option<String>,
        issued_token: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalUrls {
    pub store: Option<String>,
    pub manifest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointBehavior {
    pub status: u16,
    pub content_type: String,
    pub body: String,
    /// When false the configured response is returned whatever the
    /// `Authorization` header says.
    pub honor_token: bool,
    #[serde(default)]
    pub accepted_tokens: Vec<String>,
    /// Requests numbered from this count onward (0-based) get a 429.
    #[serde(default)]
    pub rate_limit_after: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSpec {
    Static {
        status: u16,
        content_type: String,
        body: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        headers: BTreeMap<String, String>,
    },
    Redirect {
        status: u16,
        location: String,
    },
    /// Keyed by upper-case method name.
    Endpoint {
        methods: BTreeMap<String, EndpointBehavior>,
    },
}

impl ResponseSpec {
    pub fn json(status: u16, body: impl Into<String>) -> Self {
        ResponseSpec::Static {
            status,
            content_type: "application/json".into(),
            body: body.into(),
            headers: BTreeMap::new(),
        }
    }

    pub fn html(status: u16, body: impl Into<String>) -> Self {
        ResponseSpec::Static {
            status,
            content_type: "text/html; charset=utf-8".into(),
            body: body.into(),
            headers: BTreeMap::new(),
        }
    }

    pub fn status_only(status: u16) -> Self {
        ResponseSpec::Static {
            status,
            content_type: "text/plain".into(),
            body: String::new(),
            headers: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub host: String,
    /// Absolute path without query.
    pub path: String,
    pub response: ResponseSpec,
}

/// Response for any path on `host` that has no explicit route.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostFallback {
    pub host: String,
    pub response: ResponseSpec,
}

/// What an audit of this plugin should find.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Expectation {
    pub case: Option<TokenCase>,
    pub unprobeable: Option<UnprobeableReason>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failed_endpoints: BTreeMap<FailureCause, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<FindingKind>,
    pub scope_category: Option<RiskCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixturePlugin {
    pub slug: String,
    pub store: StoreListing,
    pub accessibility_profile: Verdict,
    pub auth_profile: AuthProfile,
    pub manifest_name_for_human: Option<String>,
    pub manifest_name_for_model: Option<String>,
    pub legal_urls: LegalUrls,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
    #[serde(default)]
    pub fallbacks: Vec<HostFallback>,
    pub expected: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("plan schema_version {0} is not supported (expected {PLAN_SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("duplicate plugin slug {0:?}")]
    DuplicateSlug(String),
    #[error("conflicting definitions for route {host}{path}")]
    ConflictingRoute { host: String, path: String },
    #[error("conflicting fallbacks for host {0}")]
    ConflictingFallback(String),
    #[error("host fallback for {0} must be a static response or redirect")]
    EndpointFallback(String),
    #[error("route path {0:?} must start with '/' and carry no query")]
    BadPath(String),
    #[error("accessible plugin {slug:?} serves no parseable manifest: {detail}")]
    MissingManifest { slug: String, detail: String },
}

/// Flattened routing table; identical duplicates across plugins collapse.
#[derive(Debug, Clone, Default)]
pub struct RouteTable {
    pub routes: BTreeMap<(String, String), ResponseSpec>,
    pub fallbacks: BTreeMap<String, ResponseSpec>,
}

impl RouteTable {
    pub fn build(plan: &FixturePlan) -> Result<Self, PlanError> {
        let mut table = RouteTable::default();
        for p in &plan.plugins {
            for r in &p.routes {
                if !r.path.starts_with('/') || r.path.contains('?') {
                    return Err(PlanError::BadPath(r.path.clone()));
                }
                let key = (r.host.to_ascii_lowercase(), r.path.clone());
                match table.routes.get(&key) {
                    Some(existing) if existing != &r.response => {
                        return Err(PlanError::ConflictingRoute {
                            host: key.0,
                            path: key.1,
                        });
                    }
                    Some(_) => {}
                    None => {
                        table.routes.insert(key, r.response.clone());
                    }
                }
            }
            for f in &p.fallbacks {
                if matches!(f.response, ResponseSpec::Endpoint { .. }) {
                    return Err(PlanError::EndpointFallback(f.host.clone()));
                }
                let host = f.host.to_ascii_lowercase();
                match table.fallbacks.get(&host) {
                    Some(existing) if existing != &f.response => return Err(PlanError::ConflictingFallback(host)),
                    Some(_) => {}
                    None => {
                        table.fallbacks.insert(host, f.response.clone());
                    }
                }
            }
        }
        Ok(table)
    }
}

fn manifest_body(p: &FixturePlugin) -> Option<&str> {
    p.routes.iter().find_map(|r| match &r.response {
        ResponseSpec::Static { status: 200, body, .. }
            if r.path.ends_with("/ai-plugin.json") || r.path.ends_with("/.well-known/") =>
        {
            Some(body.as_str())
        }
        _ => None,
    })
}

impl FixturePlan {
    /// Checks slug uniqueness, route consistency and that every plugin
    /// profiled Accessible serves a manifest the parser accepts.
    pub fn validate(&self) -> Result<RouteTable, PlanError> {
        if self.schema_version != PLAN_SCHEMA_VERSION {
            return Err(PlanError::SchemaVersion(self.schema_version));
        }
        let mut slugs = BTreeSet::new();
        for p in &self.plugins {
            if !slugs.insert(p.slug.as_str()) {
                return Err(PlanError::DuplicateSlug(p.slug.clone()));
            }
            if p.accessibility_profile == Verdict::Accessible {
                let missing = |detail: String| PlanError::MissingManifest {
                    slug: p.slug.clone(),
                    detail,
                };
                let body = manifest_body(p).ok_or_else(|| missing("no 200 manifest route".into()))?;
                parse_manifest(body.as_bytes()).map_err(|e| missing(e.to_string()))?;
            }
        }
        RouteTable::build(self)
    }

    /// The store index as NDJSON, one listing per line in plan order.
    pub fn render_index(&self) -> String {
        let mut out = String::new();
        for p in &self.plugins {
            let line = serde_json::json!({
                "title": p.store.title,
                "name_for_human": p.store.name_for_human,
                "description": p.store.description,
                "legal_info_url": p.store.legal_info_url,
                "logo_url": p.store.logo_url,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn snapshot_label(&self) -> &'static str {
        self.profile.label()
    }
}
