//! Seeded plan synthesis.
//!
//! The "paper-tables" profile builds 1032 listings whose audit reproduces the
//! first-assessment tables: 373 exposed manifests split into token cases
//! 8/74/24/141/98, 173 failed endpoints split 58/66/49, metadata findings
//! 34/8/27 including a 17-plugin shared manifest, and 71 OAuth scopes. The
//! "revisit" profile starts from the same listings and applies remediation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use storeaudit_core::consistency::FindingKind;
use storeaudit_core::corpus::PluginId;
use storeaudit_core::discovery::Verdict;
use storeaudit_core::probe::{FailureCause, TokenCase, UnprobeableReason};
use storeaudit_core::scoperisk::RiskCategory;

use crate::plan::{
    AuthProfile, EndpointBehavior, Expectation, FixturePlan, FixturePlugin, HostFallback, LegalUrls, PlanProfile,
    ResponseSpec, RouteSpec, StoreListing, DEFAULT_PORT, PLAN_SCHEMA_VERSION, WELL_KNOWN_MANIFEST,
};

const ADJECTIVES: &[&str] = &[
    "Swift", "Bright", "Quiet", "Golden", "Silver", "Lucky", "Clever", "Happy", "Rapid", "Smart", "Cosmic", "Urban",
    "Green", "Blue", "Crimson", "Daily", "Global", "Local", "Pocket", "Prime", "Solar", "Lunar", "Nimble", "Bold",
    "Calm", "Fresh", "Hidden", "Magic", "Noble", "Polar", "Royal", "Secret", "Simple", "Sunny", "Tiny", "Vivid",
    "Wild", "Zesty", "Epic", "Fancy", "Gentle", "Honest", "Jolly", "Keen", "Lively", "Mighty", "Neat", "Open",
];

const NOUNS: &[&str] = &[
    "Recipe", "Travel", "Finance", "Weather", "Garden", "Fitness", "Music", "Movie", "Stock", "Crypto", "Job",
    "Resume", "Lawyer", "Doctor", "Tutor", "Quiz", "Poem", "Story", "Chart", "Slide", "Video", "Photo", "Map",
    "Flight", "Hotel", "Wine", "Coffee", "Book", "News", "Sport", "Game", "Shop", "Deal", "Coupon", "Pet", "Plant",
    "Star", "Code", "Data", "Note", "Task", "Mail", "Voice", "Event", "Ticket", "Home", "Car", "Bike",
];

const TLDS: &[&str] = &["com", "io", "ai", "app", "dev", "net"];
const LEGAL_PATHS: &[&str] = &["legal", "terms", "privacy", "terms-of-service", "tos"];
const SEGMENTS: &[&str] = &["docs", "plugin", "support"];
const NAME_SUFFIXES: &[&str] = &["Pro", "Plus", "Assistant", "AI", "GPT"];
const LANDING_HOSTS: &[&str] = &[
    "start.linkhub.io",
    "landing.sitebuilder.net",
    "www.parked-domains.com",
    "home.pageforge.app",
    "welcome.launchpad.dev",
];

const MIXERBOX_HOST: &str = "www.mixerbox.com";
const MIXERBOX_LEGAL: &str = "https://www.mixerbox.com/terms";
const MIXERBOX_NAME: &str = "MixerBox OnePlayer";
const MIXERBOX_DESCRIPTION: &str = "Unlimited music, podcasts and videos across various genres.";
const MIXERBOX_TITLES: &[&str] = &[
    "MixerBox OnePlayer",
    "MixerBox ChatVideo",
    "MixerBox ChatMap",
    "MixerBox Calendar",
    "MixerBox Podcasts",
    "MixerBox Translate",
    "MixerBox Weather",
    "MixerBox News",
    "MixerBox Scholar",
    "MixerBox Photomagic",
    "MixerBox FreeCam",
    "MixerBox Diagrams",
    "MixerBox QR",
    "MixerBox ChatPDF",
    "MixerBox Prompt",
    "MixerBox ImageGen",
    "MixerBox WebSearchG",
];

const PREFIXED_TITLE: &str = "A Digital Pet";
const TWIN_TITLE: &str = "Digital Pet";

const VALID_BODY: &str = r#"{"results":[{"id":"1","title":"Sample result"}]}"#;

/// OAuth scope strings and the category each one is meant to exercise.
/// `None` entries are OAuth plugins that declare no usable scope.
const SCOPES: &[(Option<&str>, RiskCategory)] = &[
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("all"), RiskCategory::GlobalAccess),
    (Some("baas-full-access"), RiskCategory::GlobalAccess),
    (Some("full-access"), RiskCategory::GlobalAccess),
    (Some("read+write"), RiskCategory::ReadWrite),
    (Some("read write read offline_access"), RiskCategory::ReadWrite),
    (Some("read write"), RiskCategory::ReadWrite),
    (Some("read"), RiskCategory::ReadWrite),
    (Some("write"), RiskCategory::ReadWrite),
    (Some("read,write"), RiskCategory::ReadWrite),
    (Some("offline_access read"), RiskCategory::ReadWrite),
    (Some("openai"), RiskCategory::OpenAIPlatform),
    (Some("openai"), RiskCategory::OpenAIPlatform),
    (Some("openai"), RiskCategory::OpenAIPlatform),
    (Some("openai"), RiskCategory::OpenAIPlatform),
    (Some("oai11/global"), RiskCategory::OpenAIPlatform),
    (
        Some("openid email https://openai.videoinsights.io/all"),
        RiskCategory::OpenAIPlatform,
    ),
    (Some("email"), RiskCategory::IdentityEmail),
    (Some("email"), RiskCategory::IdentityEmail),
    (Some("email"), RiskCategory::IdentityEmail),
    (Some("email"), RiskCategory::IdentityEmail),
    (Some("profile"), RiskCategory::IdentityEmail),
    (Some("profile"), RiskCategory::IdentityEmail),
    (
        Some("w_member_social openid profile email"),
        RiskCategory::IdentityEmail,
    ),
    (Some("openid offline_access"), RiskCategory::IdentityEmail),
    (
        Some("playlist-modify-public user-read-email"),
        RiskCategory::IdentityEmail,
    ),
    (Some("openid email profile"), RiskCategory::IdentityEmail),
    (Some("openid profile"), RiskCategory::IdentityEmail),
    (Some("project"), RiskCategory::ProjectTask),
    (
        Some("basic_access email offline_access manage_library"),
        RiskCategory::ProjectTask,
    ),
    (Some("nla:exposed_actions"), RiskCategory::ExecuteActions),
];
const UNSCOPED_OAUTH: usize = 35;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Search,
    CreateItem,
    GetItem,
    Status,
}

impl Shape {
    const PRIMARY: [Shape; 3] = [Shape::Search, Shape::CreateItem, Shape::GetItem];

    fn method(self) -> &'static str {
        match self {
            Shape::CreateItem => "POST",
            _ => "GET",
        }
    }

    fn served_path(self) -> &'static str {
        match self {
            Shape::Search => "/v1/search",
            Shape::CreateItem => "/v1/items",
            Shape::GetItem => "/v1/items/test",
            Shape::Status => "/v1/status",
        }
    }

    fn document(self) -> (&'static str, Value) {
        let ok = json!({
            "200": {
                "description": "OK",
                "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Result"}}}
            }
        });
        match self {
            Shape::Search => (
                "/v1/search",
                json!({"get": {
                    "operationId": "search",
                    "parameters": [{"name": "q", "in": "query", "required": true, "schema": {"type": "string"}}],
                    "responses": ok
                }}),
            ),
            Shape::CreateItem => (
                "/v1/items",
                json!({"post": {
                    "operationId": "createItem",
                    "requestBody": {"content": {"application/json": {"schema": {"$ref": "#/components/schemas/Item"}}}},
                    "responses": ok
                }}),
            ),
            Shape::GetItem => (
                "/v1/items/{id}",
                json!({"get": {
                    "operationId": "getItem",
                    "parameters": [{"name": "id", "in": "path", "required": true, "schema": {"type": "string"}}],
                    "responses": ok
                }}),
            ),
            Shape::Status => ("/v1/status", json!({"get": {"operationId": "status", "responses": ok}})),
        }
    }
}

/// How one endpoint answers.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Behave {
    /// Valid data for anyone.
    Open,
    /// Valid data only for the token leaked through the manifest.
    Gated,
    Fail(Fail),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fail {
    /// 401 unless the caller holds the real secret.
    LackAuth,
    Status(u16),
    /// 200 with an HTML error page.
    Html,
    /// 429 from the first request on.
    Rate,
}

impl Fail {
    fn cause(self) -> FailureCause {
        match self {
            Fail::LackAuth => FailureCause::LackAuthorization,
            Fail::Rate => FailureCause::RateLimited,
            Fail::Status(_) | Fail::Html => FailureCause::ClientError,
        }
    }
}

fn behavior(b: &Behave, secret: &str, leaked: &str) -> EndpointBehavior {
    let base = EndpointBehavior {
        status: 200,
        content_type: "application/json".into(),
        body: VALID_BODY.into(),
        honor_token: false,
        accepted_tokens: vec![],
        rate_limit_after: None,
    };
    match b {
        Behave::Open => base,
        Behave::Gated => EndpointBehavior {
            honor_token: true,
            accepted_tokens: vec![leaked.to_string()],
            ..base
        },
        Behave::Fail(Fail::LackAuth) => EndpointBehavior {
            honor_token: true,
            accepted_tokens: vec![secret.to_string()],
            ..base
        },
        Behave::Fail(Fail::Status(code)) => {
            let message = match code {
                400 => "bad request: missing required parameters",
                404 => "not found",
                405 => "method not allowed",
                _ => "internal server error",
            };
            EndpointBehavior {
                status: *code,
                body: json!({ "error": message }).to_string(),
                ..base
            }
        }
        Behave::Fail(Fail::Html) => EndpointBehavior {
            content_type: "text/html; charset=utf-8".into(),
            body: "<html><body><h1>Something went wrong</h1></body></html>".into(),
            ..base
        },
        Behave::Fail(Fail::Rate) => EndpointBehavior {
            rate_limit_after: Some(0),
            ..base
        },
    }
}

#[derive(Debug, Clone)]
enum ApiPlan {
    Served(Vec<(Shape, Behave)>),
    Missing,
    Syntax,
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FindingPlan {
    None,
    StoreName,
    ModelName,
    PrefixedName,
    Description,
    LegalUrl,
    BenignName,
    BenignDescription,
    BenignLegal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AuthKind {
    None,
    Bearer,
    UserBearer,
    OAuth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    Root,
    Segment,
    DirectoryIndex,
}

/// One exposed plugin before it is rendered into routes.
#[derive(Debug, Clone)]
struct ExposedSpec {
    auth: AuthKind,
    api: ApiPlan,
    case: Option<TokenCase>,
    unprobeable: Option<UnprobeableReason>,
    finding: FindingPlan,
}

struct Tokens {
    leaked: String,
    secret: String,
}

struct Gen {
    rng: ChaCha8Rng,
    titles: BTreeSet<String>,
}

fn slugify(title: &str) -> String {
    let mut slug = String::new();
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.ends_with('-') {
            slug.push('-');
        }
    }
    slug.trim_matches('-').to_string()
}

fn model_name(human: &str) -> String {
    human.replace(' ', "")
}

fn describe(title: &str) -> String {
    format!("{title} helps you find answers and get things done from chat.")
}

impl Gen {
    fn new(seed: u64) -> Self {
        let mut titles = BTreeSet::new();
        for t in MIXERBOX_TITLES.iter().chain([PREFIXED_TITLE, TWIN_TITLE].iter()) {
            titles.insert(t.to_string());
        }
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            titles,
        }
    }

    fn fresh_title(&mut self) -> String {
        loop {
            let adj = ADJECTIVES.choose(&mut self.rng).expect("nonempty");
            let noun = NOUNS.choose(&mut self.rng).expect("nonempty");
            let title = format!("{adj} {noun}");
            if self.titles.insert(title.clone()) {
                return title;
            }
        }
    }

    fn host_for(&mut self, slug: &str) -> String {
        let tld = TLDS.choose(&mut self.rng).expect("nonempty");
        format!("{slug}.{tld}")
    }

    fn token(&mut self, prefix: &str) -> String {
        let n: u128 = self.rng.random();
        format!("{prefix}-{:024x}", n & ((1u128 << 96) - 1))
    }

    fn pick<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items.choose(&mut self.rng).expect("nonempty")
    }

    fn exposed(&mut self, spec: &ExposedSpec, scope: Option<(Option<&str>, RiskCategory)>) -> FixturePlugin {
        let title = if spec.finding == FindingPlan::PrefixedName {
            PREFIXED_TITLE.to_string()
        } else {
            self.fresh_title()
        };
        let slug = slugify(&title);
        let host = self.host_for(&slug);
        let roll: f64 = self.rng.random();
        let placement = if roll < 0.85 {
            Placement::Root
        } else if roll < 0.95 {
            Placement::Segment
        } else {
            Placement::DirectoryIndex
        };
        let legal_path = self.pick(LEGAL_PATHS);
        let (store_legal, manifest_path) = match placement {
            Placement::Root => (format!("https://{host}/{legal_path}"), WELL_KNOWN_MANIFEST.to_string()),
            Placement::Segment => {
                let seg = self.pick(SEGMENTS);
                (
                    format!("https://{host}/{seg}/{legal_path}"),
                    format!("/{seg}{WELL_KNOWN_MANIFEST}"),
                )
            }
            Placement::DirectoryIndex => (format!("https://{host}/{legal_path}"), "/.well-known/".to_string()),
        };
        let api_host = if self.rng.random_bool(0.5) {
            format!("api.{host}")
        } else {
            host.clone()
        };
        let yaml = self.rng.random_bool(0.4);
        let api_path = if yaml { "/openapi.yaml" } else { "/openapi.json" };
        let tokens = Tokens {
            leaked: self.token("vt"),
            secret: self.token("sk"),
        };

        let description = describe(&title);
        let mut human = title.clone();
        let mut model = model_name(&title);
        let mut manifest_description = description.clone();
        let mut manifest_legal = store_legal.clone();
        let mut findings = Vec::new();
        match spec.finding {
            FindingPlan::None => {}
            FindingPlan::StoreName => {
                human = format!("{title} {}", self.pick(NAME_SUFFIXES));
                model = model_name(&human);
                findings.push(FindingKind::InconsistentName);
            }
            FindingPlan::ModelName => {
                model = format!("{}_v2", slug.replace('-', "_"));
                findings.push(FindingKind::InconsistentName);
            }
            FindingPlan::PrefixedName => {
                human = TWIN_TITLE.to_string();
                model = model_name(TWIN_TITLE);
                findings.push(FindingKind::InconsistentName);
                findings.push(FindingKind::QuantifierPrefix);
            }
            FindingPlan::Description => {
                manifest_description = format!("The best {} companion for every conversation.", title.to_lowercase());
                findings.push(FindingKind::DifferentDescription);
            }
            FindingPlan::LegalUrl => {
                manifest_legal = format!("https://{host}/privacy-policy");
                findings.push(FindingKind::MismatchedLegalUrl);
            }
            FindingPlan::BenignName => human = title.to_lowercase(),
            FindingPlan::BenignDescription => manifest_description = format!("{}  ", description.to_uppercase()),
            FindingPlan::BenignLegal => {
                manifest_legal = format!("http://{host}/{}/", store_legal.splitn(4, '/').nth(3).unwrap_or(""))
            }
        }

        let mut routes = Vec::new();
        let (auth_profile, auth_json) = match spec.auth {
            AuthKind::None => (AuthProfile::None, json!({"type": "none"})),
            AuthKind::Bearer => {
                let required = match &spec.api {
                    ApiPlan::Served(eps) if eps.iter().any(|(_, b)| *b == Behave::Gated) => tokens.leaked.clone(),
                    _ => tokens.secret.clone(),
                };
                (
                    AuthProfile::Bearer {
                        required_token: required,
                    },
                    json!({
                        "type": "service_http",
                        "authorization_type": "bearer",
                        "verification_tokens": {"openai": tokens.leaked}
                    }),
                )
            }
            AuthKind::UserBearer => (
                AuthProfile::UserBearer,
                json!({"type": "user_http", "authorization_type": "bearer"}),
            ),
            AuthKind::OAuth => {
                let raw_scope = scope.and_then(|(s, _)| s).map(str::to_string);
                // unscoped plugins alternate between an omitted and an empty scope
                let scope_value = match &raw_scope {
                    Some(s) => Some(s.clone()),
                    None if self.rng.random_bool(0.5) => Some(String::new()),
                    None => None,
                };
                let mut auth = json!({
                    "type": "oauth",
                    "client_url": format!("https://{host}/oauth/authorize"),
                    "authorization_url": format!("https://{host}/oauth/token"),
                    "authorization_content_type": "application/json",
                    "verification_tokens": {"openai": tokens.leaked}
                });
                if let Some(s) = &scope_value {
                    auth["scope"] = json!(s);
                }
                routes.push(RouteSpec {
                    host: host.clone(),
                    path: "/oauth/token".into(),
                    response: ResponseSpec::Endpoint {
                        methods: BTreeMap::from([(
                            "POST".to_string(),
                            EndpointBehavior {
                                status: 200,
                                content_type: "application/json".into(),
                                body: json!({"access_token": tokens.secret, "token_type": "bearer"}).to_string(),
                                honor_token: false,
                                accepted_tokens: vec![],
                                rate_limit_after: None,
                            },
                        )]),
                    },
                });
                (
                    AuthProfile::OAuth {
                        scope: scope_value,
                        issued_token: tokens.secret.clone(),
                    },
                    auth,
                )
            }
        };

        let api_url = format!("https://{api_host}{api_path}");
        let manifest = json!({
            "schema_version": "v1",
            "name_for_human": human,
            "name_for_model": model,
            "description_for_human": manifest_description,
            "description_for_model": format!("Plugin for {title}. Use it when the user asks about {}.", title.to_lowercase()),
            "auth": auth_json,
            "api": {"type": "openapi", "url": api_url, "is_user_authenticated": spec.auth == AuthKind::UserBearer},
            "logo_url": format!("https://{host}/logo.png"),
            "contact_email": format!("support@{host}"),
            "legal_info_url": manifest_legal,
        });
        routes.push(RouteSpec {
            host: host.clone(),
            path: manifest_path,
            response: ResponseSpec::json(200, serde_json::to_string_pretty(&manifest).expect("json")),
        });

        let mut failed = BTreeMap::new();
        match &spec.api {
            ApiPlan::Missing => {}
            ApiPlan::Syntax => routes.push(RouteSpec {
                host: api_host.clone(),
                path: api_path.into(),
                response: ResponseSpec::json(
                    200,
                    format!("{{\"openapi\": \"3.0.1\", \"info\": {{\"title\": \"{title}\""),
                ),
            }),
            ApiPlan::Empty => routes.push(RouteSpec {
                host: api_host.clone(),
                path: api_path.into(),
                response: openapi_doc(&title, &api_host, &[], yaml),
            }),
            ApiPlan::Served(endpoints) => {
                let shapes: Vec<Shape> = endpoints.iter().map(|(s, _)| *s).collect();
                routes.push(RouteSpec {
                    host: api_host.clone(),
                    path: api_path.into(),
                    response: openapi_doc(&title, &api_host, &shapes, yaml),
                });
                for (shape, b) in endpoints {
                    routes.push(RouteSpec {
                        host: api_host.clone(),
                        path: shape.served_path().into(),
                        response: ResponseSpec::Endpoint {
                            methods: BTreeMap::from([(
                                shape.method().to_string(),
                                behavior(b, &tokens.secret, &tokens.leaked),
                            )]),
                        },
                    });
                    if let Behave::Fail(f) = b {
                        if !spec.case.is_some_and(TokenCase::retrieved_data) {
                            *failed.entry(f.cause()).or_insert(0) += 1;
                        }
                    }
                }
            }
        }

        FixturePlugin {
            slug,
            store: StoreListing {
                name_for_human: title.clone(),
                title,
                description: Some(description),
                legal_info_url: Some(store_legal.clone()),
                logo_url: Some(format!("https://{host}/logo.png")),
            },
            accessibility_profile: Verdict::Accessible,
            auth_profile,
            manifest_name_for_human: Some(human),
            manifest_name_for_model: Some(model),
            legal_urls: LegalUrls {
                store: Some(store_legal),
                manifest: Some(manifest_legal),
            },
            routes,
            fallbacks: vec![],
            expected: Expectation {
                case: spec.case,
                unprobeable: spec.unprobeable,
                failed_endpoints: failed,
                findings,
                scope_category: scope.map(|(_, c)| c),
            },
        }
    }

    fn unexposed(
        &mut self,
        verdict: Verdict,
        title: Option<String>,
        legal: Option<String>,
        fallbacks: Vec<HostFallback>,
        routes: Vec<RouteSpec>,
    ) -> FixturePlugin {
        let title = title.unwrap_or_else(|| self.fresh_title());
        let slug = slugify(&title);
        FixturePlugin {
            slug,
            store: StoreListing {
                name_for_human: title.clone(),
                description: Some(describe(&title)),
                title,
                legal_info_url: legal.clone(),
                logo_url: None,
            },
            accessibility_profile: verdict,
            auth_profile: AuthProfile::None,
            manifest_name_for_human: None,
            manifest_name_for_model: None,
            legal_urls: LegalUrls {
                store: legal,
                manifest: None,
            },
            routes,
            fallbacks,
            expected: Expectation::default(),
        }
    }

    fn own_host_plugin(
        &mut self,
        verdict: Verdict,
        fallback: Option<ResponseSpec>,
        extra_routes: Vec<RouteSpec>,
    ) -> FixturePlugin {
        let title = self.fresh_title();
        let slug = slugify(&title);
        let host = self.host_for(&slug);
        let legal_path = self.pick(LEGAL_PATHS);
        let fallbacks = fallback
            .map(|response| {
                vec![HostFallback {
                    host: host.clone(),
                    response,
                }]
            })
            .unwrap_or_default();
        self.unexposed(
            verdict,
            Some(title),
            Some(format!("https://{host}/{legal_path}")),
            fallbacks,
            extra_routes,
        )
    }
}

fn openapi_doc(title: &str, api_host: &str, shapes: &[Shape], yaml: bool) -> ResponseSpec {
    let mut paths = serde_json::Map::new();
    for s in shapes {
        let (path, item) = s.document();
        paths.insert(path.to_string(), item);
    }
    let doc = json!({
        "openapi": "3.0.1",
        "info": {"title": title, "version": "v1"},
        "servers": [{"url": format!("https://{api_host}")}],
        "paths": paths,
        "components": {"schemas": {
            "Result": {
                "type": "object",
                "required": ["results"],
                "properties": {"results": {"type": "array", "items": {"$ref": "#/components/schemas/Item"}}}
            },
            "Item": {
                "type": "object",
                "properties": {"id": {"type": "string"}, "title": {"type": "string"}}
            }
        }}
    });
    if yaml {
        ResponseSpec::Static {
            status: 200,
            content_type: "application/yaml".into(),
            body: serde_yaml::to_string(&doc).expect("yaml"),
            headers: BTreeMap::new(),
        }
    } else {
        ResponseSpec::json(200, serde_json::to_string_pretty(&doc).expect("json"))
    }
}

fn repeat<T: Clone>(out: &mut Vec<T>, item: T, n: usize) {
    out.extend(std::iter::repeat_n(item, n));
}

fn mixerbox_plugins() -> Vec<FixturePlugin> {
    let manifest = json!({
        "schema_version": "v1",
        "name_for_human": MIXERBOX_NAME,
        "name_for_model": model_name(MIXERBOX_NAME),
        "description_for_human": MIXERBOX_DESCRIPTION,
        "description_for_model": "Search and play music, podcasts and videos for the user.",
        "auth": {"type": "none"},
        "api": {"type": "openapi", "url": format!("https://{MIXERBOX_HOST}/openapi.json"), "is_user_authenticated": false},
        "logo_url": format!("https://{MIXERBOX_HOST}/logo.png"),
        "contact_email": "support@mixerbox.com",
        "legal_info_url": MIXERBOX_LEGAL,
    });
    let routes = vec![
        RouteSpec {
            host: MIXERBOX_HOST.into(),
            path: WELL_KNOWN_MANIFEST.into(),
            response: ResponseSpec::json(200, serde_json::to_string_pretty(&manifest).expect("json")),
        },
        RouteSpec {
            host: MIXERBOX_HOST.into(),
            path: "/openapi.json".into(),
            response: openapi_doc(MIXERBOX_NAME, MIXERBOX_HOST, &[Shape::Search], false),
        },
        RouteSpec {
            host: MIXERBOX_HOST.into(),
            path: Shape::Search.served_path().into(),
            response: ResponseSpec::Endpoint {
                methods: BTreeMap::from([("GET".to_string(), behavior(&Behave::Open, "", ""))]),
            },
        },
    ];
    // the group finding is attributed to the lowest plugin id
    let first = MIXERBOX_TITLES
        .iter()
        .min_by_key(|t| PluginId::from_listing(t, Some(MIXERBOX_LEGAL)))
        .expect("nonempty");
    MIXERBOX_TITLES
        .iter()
        .map(|title| {
            let mut findings = Vec::new();
            if *title != MIXERBOX_NAME {
                findings.push(FindingKind::InconsistentName);
            }
            if title == first {
                findings.push(FindingKind::SharedManifestGroup);
            }
            FixturePlugin {
                slug: slugify(title),
                store: StoreListing {
                    title: title.to_string(),
                    name_for_human: title.to_string(),
                    description: Some(MIXERBOX_DESCRIPTION.into()),
                    legal_info_url: Some(MIXERBOX_LEGAL.into()),
                    logo_url: Some(format!("https://{MIXERBOX_HOST}/logo.png")),
                },
                accessibility_profile: Verdict::Accessible,
                auth_profile: AuthProfile::None,
                manifest_name_for_human: Some(MIXERBOX_NAME.into()),
                manifest_name_for_model: Some(model_name(MIXERBOX_NAME)),
                legal_urls: LegalUrls {
                    store: Some(MIXERBOX_LEGAL.into()),
                    manifest: Some(MIXERBOX_LEGAL.into()),
                },
                routes: routes.clone(),
                fallbacks: vec![],
                expected: Expectation {
                    case: Some(TokenCase::Case4),
                    findings,
                    ..Expectation::default()
                },
            }
        })
        .collect()
}

fn exposed_specs(g: &mut Gen) -> Vec<ExposedSpec> {
    let spec = |auth, api, case| ExposedSpec {
        auth,
        api,
        case: Some(case),
        unprobeable: None,
        finding: FindingPlan::None,
    };
    let mut specs = Vec::new();

    // open APIs; some expose a second, broken endpoint
    for i in 0..124 {
        let shape = *Shape::PRIMARY.choose(&mut g.rng).expect("nonempty");
        let mut eps = vec![(shape, Behave::Open)];
        if i < 20 {
            eps.push((Shape::Status, Behave::Fail(Fail::Status(404))));
        }
        specs.push(spec(AuthKind::None, ApiPlan::Served(eps), TokenCase::Case4));
    }

    // open APIs that fail: 99 endpoints over 98 plugins
    let mut fails = Vec::new();
    repeat(&mut fails, Fail::LackAuth, 6);
    repeat(&mut fails, Fail::Status(400), 24);
    repeat(&mut fails, Fail::Status(404), 12);
    repeat(&mut fails, Fail::Status(405), 8);
    repeat(&mut fails, Fail::Status(500), 6);
    repeat(&mut fails, Fail::Html, 4);
    repeat(&mut fails, Fail::Rate, 39);
    fails.shuffle(&mut g.rng);
    let mut fails = fails.into_iter();
    for i in 0..98 {
        let mut eps = vec![(
            *Shape::PRIMARY.choose(&mut g.rng).expect("nonempty"),
            Behave::Fail(fails.next().expect("99")),
        )];
        if i == 0 {
            eps = vec![
                (Shape::Search, eps[0].1.clone()),
                (Shape::GetItem, Behave::Fail(fails.next().expect("99"))),
            ];
        }
        specs.push(spec(AuthKind::None, ApiPlan::Served(eps), TokenCase::Case5));
    }

    // leaked verification tokens replay successfully
    for auth in [AuthKind::OAuth; 5].into_iter().chain([AuthKind::Bearer; 3]) {
        specs.push(spec(
            auth,
            ApiPlan::Served(vec![(Shape::Search, Behave::Gated)]),
            TokenCase::Case1,
        ));
    }
    // token nominally required, never checked
    for auth in [AuthKind::OAuth; 22].into_iter().chain([AuthKind::Bearer; 2]) {
        let shape = *Shape::PRIMARY.choose(&mut g.rng).expect("nonempty");
        specs.push(spec(
            auth,
            ApiPlan::Served(vec![(shape, Behave::Open)]),
            TokenCase::Case3,
        ));
    }
    // protected
    let mut auths = Vec::new();
    repeat(&mut auths, AuthKind::OAuth, 43);
    repeat(&mut auths, AuthKind::Bearer, 29);
    repeat(&mut auths, AuthKind::UserBearer, 2);
    auths.shuffle(&mut g.rng);
    let mut causes = Vec::new();
    repeat(&mut causes, Fail::LackAuth, 52);
    repeat(&mut causes, Fail::Status(400), 8);
    repeat(&mut causes, Fail::Status(404), 4);
    repeat(&mut causes, Fail::Rate, 10);
    causes.shuffle(&mut g.rng);
    for (auth, cause) in auths.into_iter().zip(causes) {
        let shape = *Shape::PRIMARY.choose(&mut g.rng).expect("nonempty");
        specs.push(spec(
            auth,
            ApiPlan::Served(vec![(shape, Behave::Fail(cause))]),
            TokenCase::Case2,
        ));
    }

    // manifests whose API cannot be probed
    let unprobeable = |auth, api, reason| ExposedSpec {
        auth,
        api,
        case: None,
        unprobeable: Some(reason),
        finding: FindingPlan::None,
    };
    for _ in 0..10 {
        specs.push(unprobeable(
            AuthKind::None,
            ApiPlan::Missing,
            UnprobeableReason::ApiUnreachable,
        ));
        specs.push(unprobeable(
            AuthKind::None,
            ApiPlan::Syntax,
            UnprobeableReason::ApiSyntaxError,
        ));
    }
    for i in 0..8 {
        let auth = if i == 0 { AuthKind::OAuth } else { AuthKind::None };
        specs.push(unprobeable(auth, ApiPlan::Empty, UnprobeableReason::EmptyApi));
    }

    // metadata findings go to plugins that return data, one kind per plugin
    let mut pool: Vec<usize> = specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.case.is_some_and(TokenCase::retrieved_data))
        .map(|(i, _)| i)
        .collect();
    pool.shuffle(&mut g.rng);
    let mut plan = Vec::new();
    repeat(&mut plan, FindingPlan::StoreName, 10);
    repeat(&mut plan, FindingPlan::ModelName, 7);
    repeat(&mut plan, FindingPlan::PrefixedName, 1);
    repeat(&mut plan, FindingPlan::Description, 8);
    repeat(&mut plan, FindingPlan::LegalUrl, 27);
    repeat(&mut plan, FindingPlan::BenignName, 4);
    repeat(&mut plan, FindingPlan::BenignDescription, 4);
    repeat(&mut plan, FindingPlan::BenignLegal, 4);
    for (idx, finding) in pool.into_iter().zip(plan) {
        specs[idx].finding = finding;
    }
    specs
}

fn paper_plugins(g: &mut Gen) -> Vec<FixturePlugin> {
    let mut plugins = mixerbox_plugins();

    let mut scopes: Vec<(Option<&str>, RiskCategory)> = SCOPES.to_vec();
    repeat(&mut scopes, (None, RiskCategory::Unspecified), UNSCOPED_OAUTH);
    scopes.shuffle(&mut g.rng);
    let mut scopes = scopes.into_iter();

    for spec in exposed_specs(g) {
        let scope = (spec.auth == AuthKind::OAuth).then(|| scopes.next().expect("71 OAuth scopes"));
        plugins.push(g.exposed(&spec, scope));
    }
    assert!(scopes.next().is_none(), "every scope is assigned");

    // responds, but never with a manifest
    for i in 0..70 {
        let landing = LANDING_HOSTS[i % LANDING_HOSTS.len()];
        let route = RouteSpec {
            host: landing.into(),
            path: "/".into(),
            response: ResponseSpec::html(
                200,
                "<html><head><title>Welcome</title></head><body>Coming soon</body></html>",
            ),
        };
        let redirect = ResponseSpec::Redirect {
            status: 302,
            location: format!("https://{landing}/"),
        };
        plugins.push(g.own_host_plugin(Verdict::HiddenRedirect, Some(redirect), vec![route]));
    }
    for _ in 0..24 {
        let page = ResponseSpec::html(200, "<!doctype html><html><body><div id=\"root\"></div></body></html>");
        plugins.push(g.own_host_plugin(Verdict::HiddenRedirect, Some(page), vec![]));
    }
    for _ in 0..10 {
        plugins.push(g.own_host_plugin(
            Verdict::HiddenRedirect,
            Some(ResponseSpec::json(200, r#"{"status":"ok"}"#)),
            vec![],
        ));
    }

    let openai = [
        ("openai.com", "/policies/terms-of-use", 404),
        ("openai.com", "/policies/terms-of-use", 404),
        ("openai.com", "/policies/privacy-policy", 404),
        ("openai.com", "/policies/privacy-policy", 404),
        ("openai.com", "/policies/usage-policies", 404),
        ("chat.openai.com", "/legal", 403),
        ("chat.openai.com", "/legal", 403),
        ("chat.openai.com", "/privacy", 403),
        ("chat.openai.com", "/terms", 403),
        ("platform.openai.com", "/docs/plugins/review", 403),
        ("platform.openai.com", "/docs/plugins/review", 403),
        ("platform.openai.com", "/policies", 403),
    ];
    for (host, path, status) in openai {
        let fallback = HostFallback {
            host: host.into(),
            response: ResponseSpec::status_only(status),
        };
        plugins.push(g.unexposed(
            Verdict::OpenAIProtected,
            None,
            Some(format!("https://{host}{path}")),
            vec![fallback],
            vec![],
        ));
    }

    for i in 0..6 {
        let id = g.token("doc");
        let (host, url) = if i < 4 {
            (
                "docs.google.com",
                format!("https://docs.google.com/document/d/{id}/edit"),
            )
        } else {
            ("drive.google.com", format!("https://drive.google.com/file/d/{id}/view"))
        };
        let fallback = HostFallback {
            host: host.into(),
            response: ResponseSpec::status_only(403),
        };
        plugins.push(g.unexposed(Verdict::HostedGoogleDoc, None, Some(url), vec![fallback], vec![]));
    }

    for i in 0..19 {
        let title = g.fresh_title();
        let org = slugify(&title);
        let (host, url) = if i < 15 {
            (
                "github.com",
                format!("https://github.com/{org}/plugin/blob/main/PRIVACY.md"),
            )
        } else {
            (
                "raw.githubusercontent.com",
                format!("https://raw.githubusercontent.com/{org}/plugin/main/LEGAL.md"),
            )
        };
        let fallback = HostFallback {
            host: host.into(),
            response: ResponseSpec::status_only(404),
        };
        plugins.push(g.unexposed(Verdict::HostedGitHub, Some(title), Some(url), vec![fallback], vec![]));
    }

    // nothing answers: listings without legal links, then refusing hosts
    for _ in 0..10 {
        plugins.push(g.unexposed(Verdict::NativeUnreachable, None, None, vec![], vec![]));
    }
    let twin_host = g.host_for(&slugify(TWIN_TITLE));
    plugins.push(g.unexposed(
        Verdict::NativeUnreachable,
        Some(TWIN_TITLE.into()),
        Some(format!("https://{twin_host}/legal")),
        vec![],
        vec![],
    ));
    for _ in 0..507 {
        let roll: f64 = g.rng.random();
        let fallback = if roll < 0.55 {
            Some(ResponseSpec::json(404, r#"{"detail":"Not Found"}"#))
        } else if roll < 0.85 {
            None
        } else if roll < 0.95 {
            Some(ResponseSpec::html(403, "<html><body>Forbidden</body></html>"))
        } else {
            Some(ResponseSpec::status_only(406))
        };
        plugins.push(g.own_host_plugin(Verdict::NativeUnreachable, fallback, vec![]));
    }

    plugins.shuffle(&mut g.rng);
    plugins
}

fn manifest_route_index(p: &FixturePlugin) -> Option<usize> {
    p.routes
        .iter()
        .position(|r| r.path.ends_with("/ai-plugin.json") || r.path.ends_with("/.well-known/"))
}

/// Requires a secret on every open endpoint of the plugin.
fn lock_open_endpoints(p: &mut FixturePlugin, secret: &str) -> usize {
    let mut locked = 0;
    for r in &mut p.routes {
        if r.path == "/oauth/token" {
            continue;
        }
        if let ResponseSpec::Endpoint { methods } = &mut r.response {
            for b in methods.values_mut() {
                if !b.honor_token
                    && b.status == 200
                    && b.content_type == "application/json"
                    && b.rate_limit_after.is_none()
                {
                    b.honor_token = true;
                    b.accepted_tokens = vec![secret.to_string()];
                    locked += 1;
                }
            }
        }
    }
    locked
}

/// Failure causes of endpoints that fail whatever token is sent.
fn static_failures(p: &FixturePlugin) -> BTreeMap<FailureCause, usize> {
    let mut out = BTreeMap::new();
    for r in p.routes.iter().filter(|r| r.path != "/oauth/token") {
        if let ResponseSpec::Endpoint { methods } = &r.response {
            for b in methods.values().filter(|b| !b.honor_token) {
                let cause = if b.rate_limit_after.is_some() {
                    FailureCause::RateLimited
                } else if b.status != 200 || b.content_type != "application/json" {
                    FailureCause::ClientError
                } else {
                    continue;
                };
                *out.entry(cause).or_insert(0) += 1;
            }
        }
    }
    out
}

fn secret_of(p: &FixturePlugin) -> String {
    match &p.auth_profile {
        AuthProfile::OAuth { issued_token, .. } => issued_token.clone(),
        AuthProfile::Bearer { required_token } => format!("{required_token}-rotated"),
        _ => format!("sk-{}", p.slug),
    }
}

/// Applies the remediation seen on the second visit: 87 manifests taken
/// down, 52 open APIs locked, 12 token-bypass APIs fixed and 8 legal links
/// corrected.
fn remediate(plugins: &mut [FixturePlugin], rng: &mut ChaCha8Rng) {
    let is_mixerbox = |p: &FixturePlugin| p.store.legal_info_url.as_deref() == Some(MIXERBOX_LEGAL);
    let pick = |rng: &mut ChaCha8Rng,
                plugins: &[FixturePlugin],
                pred: &dyn Fn(&FixturePlugin) -> bool,
                n: usize|
     -> Vec<usize> {
        let mut idx: Vec<usize> = plugins
            .iter()
            .enumerate()
            .filter(|(_, p)| pred(p))
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(rng);
        assert!(idx.len() >= n, "remediation pool too small");
        idx.truncate(n);
        idx
    };

    let mut hidden = Vec::new();
    hidden.extend(pick(rng, plugins, &|p| p.expected.case == Some(TokenCase::Case5), 60));
    hidden.extend(pick(rng, plugins, &|p| p.expected.case == Some(TokenCase::Case2), 20));
    hidden.extend(pick(rng, plugins, &|p| p.expected.unprobeable.is_some(), 7));
    for i in hidden {
        let p = &mut plugins[i];
        if let Some(r) = manifest_route_index(p) {
            p.routes.remove(r);
        }
        p.accessibility_profile = Verdict::NativeUnreachable;
        p.expected = Expectation::default();
    }

    let open = pick(
        rng,
        plugins,
        &|p| p.expected.case == Some(TokenCase::Case4) && !is_mixerbox(p),
        52,
    );
    let oauth = pick(
        rng,
        plugins,
        &|p| p.expected.case == Some(TokenCase::Case3) && matches!(p.auth_profile, AuthProfile::OAuth { .. }),
        10,
    );
    let bearer = pick(
        rng,
        plugins,
        &|p| p.expected.case == Some(TokenCase::Case3) && matches!(p.auth_profile, AuthProfile::Bearer { .. }),
        2,
    );
    for (i, case) in open
        .into_iter()
        .map(|i| (i, TokenCase::Case5))
        .chain(oauth.into_iter().chain(bearer).map(|i| (i, TokenCase::Case2)))
    {
        let p = &mut plugins[i];
        let secret = secret_of(p);
        let locked = lock_open_endpoints(p, &secret);
        p.expected.case = Some(case);
        p.expected.failed_endpoints = static_failures(p);
        *p.expected
            .failed_endpoints
            .entry(FailureCause::LackAuthorization)
            .or_insert(0) += locked;
    }

    let legal = pick(
        rng,
        plugins,
        &|p| p.expected.findings.contains(&FindingKind::MismatchedLegalUrl),
        8,
    );
    for i in legal {
        let p = &mut plugins[i];
        let store = p.store.legal_info_url.clone();
        let r = manifest_route_index(p).expect("exposed plugin");
        if let ResponseSpec::Static { body, .. } = &mut p.routes[r].response {
            let mut v: Value = serde_json::from_str(body).expect("manifest json");
            v["legal_info_url"] = json!(store);
            *body = serde_json::to_string_pretty(&v).expect("json");
        }
        p.legal_urls.manifest = store;
        p.expected.findings.retain(|k| *k != FindingKind::MismatchedLegalUrl);
    }
}

/// Deterministic plan for `profile`; the same seed yields byte-identical
/// plans, and both profiles share the same store listings.
pub fn generate_plan(seed: u64, profile: PlanProfile) -> FixturePlan {
    let mut g = Gen::new(seed);
    let mut plugins = paper_plugins(&mut g);
    if profile == PlanProfile::Revisit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x72_6576_6973_6974);
        remediate(&mut plugins, &mut rng);
    }
    FixturePlan {
        schema_version: PLAN_SCHEMA_VERSION,
        profile,
        seed,
        listen_port: DEFAULT_PORT,
        plugins,
    }
}

pub fn generate_paper_plan(seed: u64) -> FixturePlan {
    generate_plan(seed, PlanProfile::PaperTables)
}
