//! Probe request construction and example-body synthesis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use url::Url;

use super::TokenVariant;
use crate::corpus::PluginId;
use crate::manifest::openapi::resolve_ref;
use crate::manifest::{AuthType, Endpoint, HttpMethod, ManifestDocument, OpenApiDescription, ParameterLocation};

pub const FABRICATED_TOKEN: &str = "invalid-token-0000";
pub const DEFAULT_BUDGET: usize = 12;
/// Nested `$ref`s followed during body synthesis.
const MAX_SCHEMA_DEPTH: usize = 8;
const REDACTED: &str = "Bearer <redacted>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRequest {
    pub endpoint: Endpoint,
    pub full_url: Url,
    pub token_variant: TokenVariant,
    /// Headers sent on the wire; contains `Authorization` iff the variant carries a token.
    pub headers: Vec<(String, String)>,
    pub body: Option<Value>,
}

impl ProbeRequest {
    pub fn authorization(&self) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("authorization"))
            .map(|(_, v)| v.as_str())
    }

    /// Copy with token values masked, for persisted artifacts.
    pub fn redacted(&self) -> ProbeRequest {
        let mut r = self.clone();
        for (k, v) in &mut r.headers {
            if k.eq_ignore_ascii_case("authorization") {
                *v = REDACTED.to_string();
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    UnresolvableServer,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedEndpoint {
    pub path: String,
    pub method: HttpMethod,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMatrix {
    pub plugin_id: PluginId,
    pub requests: Vec<ProbeRequest>,
    pub skipped: Vec<SkippedEndpoint>,
}

impl ProbeMatrix {
    pub fn r_token(&self) -> impl Iterator<Item = &ProbeRequest> {
        self.requests.iter().filter(|r| r.authorization().is_some())
    }

    pub fn r_no_token(&self) -> impl Iterator<Item = &ProbeRequest> {
        self.requests.iter().filter(|r| r.authorization().is_none())
    }
}

/// Example value for a schema node: strings "test", numbers 0, booleans
/// false, arrays empty, objects filled property by property.
pub fn synthesize_value(schema: &Value, schemas: &BTreeMap<String, Value>) -> Value {
    synth(schema, schemas, 0)
}

fn synth(schema: &Value, schemas: &BTreeMap<String, Value>, depth: usize) -> Value {
    if depth > MAX_SCHEMA_DEPTH {
        return Value::Null;
    }
    let node = resolve_ref(schema, schemas);
    let ty = node.get("type").and_then(|t| match t {
        Value::String(s) => Some(s.as_str()),
        // OpenAPI 3.1 type arrays: first non-null entry
        Value::Array(a) => a.iter().filter_map(Value::as_str).find(|s| *s != "null"),
        _ => None,
    });
    let props = node.get("properties").and_then(Value::as_object);
    match (ty, props) {
        (Some("string"), _) => json!("test"),
        (Some("number" | "integer"), _) => json!(0),
        (Some("boolean"), _) => json!(false),
        (Some("array"), _) => json!([]),
        (Some("object"), _) | (None, Some(_)) => {
            let mut out = Map::new();
            for (name, sub) in props.into_iter().flatten() {
                out.insert(name.clone(), synth(sub, schemas, depth + 1));
            }
            Value::Object(out)
        }
        _ => Value::Null,
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "test".into(),
        other => other.to_string(),
    }
}

fn endpoint_url(server: &Url, endpoint: &Endpoint, schemas: &BTreeMap<String, Value>) -> Option<Url> {
    let mut path = endpoint.path.clone();
    for p in endpoint
        .parameters
        .iter()
        .filter(|p| p.location == ParameterLocation::Path)
    {
        path = path.replace(&format!("{{{}}}", p.name), "test");
    }
    if path.contains('{') || server.as_str().contains('{') || server.as_str().contains("%7B") {
        return None;
    }
    let base = server.as_str().trim_end_matches('/');
    let mut url = Url::parse(&format!("{base}{path}")).ok()?;
    let query: Vec<(String, String)> = endpoint
        .parameters
        .iter()
        .filter(|p| p.location == ParameterLocation::Query && p.required)
        .map(|p| {
            let v = p.schema.as_ref().map_or(Value::Null, |s| synthesize_value(s, schemas));
            (p.name.clone(), scalar_text(&v))
        })
        .collect();
    if !query.is_empty() {
        url.query_pairs_mut().extend_pairs(query);
    }
    Some(url)
}

/// Token variants applicable to a manifest, in probe order.
pub fn variants_for(manifest: &ManifestDocument) -> Vec<TokenVariant> {
    let mut v = vec![TokenVariant::NoToken];
    if !manifest.auth.verification_tokens.is_empty() {
        v.push(TokenVariant::LeakedToken);
    }
    if manifest.auth.auth_type != AuthType::None {
        v.push(TokenVariant::FabricatedToken);
    }
    v
}

/// Builds the probe matrix under a per-plugin request budget; an endpoint
/// is probed with all of its variants or skipped entirely.
pub fn build_probe_matrix(
    plugin_id: &PluginId,
    manifest: &ManifestDocument,
    api: &OpenApiDescription,
    budget: usize,
) -> ProbeMatrix {
    let variants = variants_for(manifest);
    let leaked = manifest.auth.verification_tokens.values().next().cloned();
    let mut matrix = ProbeMatrix {
        plugin_id: plugin_id.clone(),
        requests: Vec::new(),
        skipped: Vec::new(),
    };
    for endpoint in &api.endpoints {
        let skip = |reason| SkippedEndpoint {
            path: endpoint.path.clone(),
            method: endpoint.method,
            reason,
        };
        let Some(full_url) = api
            .servers
            .first()
            .and_then(|s| endpoint_url(s, endpoint, &api.schemas))
        else {
            matrix.skipped.push(skip(SkipReason::UnresolvableServer));
            continue;
        };
        if matrix.requests.len() + variants.len() > budget {
            matrix.skipped.push(skip(SkipReason::BudgetExhausted));
            continue;
        }
        let body = endpoint.method.carries_body().then(|| {
            endpoint
                .request_schema
                .as_ref()
                .map_or_else(|| json!({}), |s| synthesize_value(s, &api.schemas))
        });
        for &variant in &variants {
            let token = match variant {
                TokenVariant::NoToken => None,
                TokenVariant::LeakedToken => leaked.clone(),
                TokenVariant::FabricatedToken => Some(FABRICATED_TOKEN.to_string()),
            };
            matrix.requests.push(ProbeRequest {
                endpoint: endpoint.clone(),
                full_url: full_url.clone(),
                token_variant: variant,
                headers: token
                    .map(|t| vec![("Authorization".to_string(), format!("Bearer {t}"))])
                    .unwrap_or_default(),
                body: body.clone(),
            });
        }
    }
    matrix
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{parse_manifest, parse_openapi};

    fn manifest(auth: &str) -> ManifestDocument {
        parse_manifest(
            format!(
                r#"{{"name_for_human":"X","name_for_model":"x","auth":{auth},
                  "api":{{"type":"openapi","url":"https://x.io/openapi.json"}}}}"#
            )
            .as_bytes(),
        )
        .unwrap()
    }

    fn api(paths: &str) -> OpenApiDescription {
        let doc = format!(r#"{{"openapi":"3.0.1","info":{{"title":"t"}},"paths":{paths}}}"#);
        parse_openapi(doc.as_bytes(), &Url::parse("https://x.io/openapi.json").unwrap()).unwrap()
    }

    #[test]
    fn open_plugin_with_two_gets() {
        let m = manifest(r#"{"type":"none"}"#);
        let a = api(r#"{"/a":{"get":{}},"/b":{"get":{}}}"#);
        let mx = build_probe_matrix(&PluginId("p".into()), &m, &a, DEFAULT_BUDGET);
        assert_eq!(mx.requests.len(), 2);
        assert!(mx
            .requests
            .iter()
            .all(|r| r.token_variant == TokenVariant::NoToken && r.body.is_none()));
        assert_eq!(mx.requests[0].full_url.as_str(), "https://x.io/a");
    }

    #[test]
    fn leaked_token_plugin_with_one_post() {
        let m =
            manifest(r#"{"type":"service_http","authorization_type":"bearer","verification_tokens":{"openai":"abc"}}"#);
        let a = api(
            r#"{"/q":{"post":{"requestBody":{"content":{"application/json":{"schema":
            {"type":"object","properties":{"query":{"type":"string"}}}}}}}}}"#,
        );
        let mx = build_probe_matrix(&PluginId("p".into()), &m, &a, DEFAULT_BUDGET);
        let variants: Vec<_> = mx.requests.iter().map(|r| r.token_variant).collect();
        assert_eq!(
            variants,
            vec![
                TokenVariant::NoToken,
                TokenVariant::LeakedToken,
                TokenVariant::FabricatedToken
            ]
        );
        assert_eq!(mx.requests[1].authorization(), Some("Bearer abc"));
        assert_eq!(mx.requests[2].authorization(), Some("Bearer invalid-token-0000"));
        assert_eq!(mx.requests[0].body, Some(json!({"query": "test"})));
        assert_eq!(mx.r_token().count(), 2);
        assert_eq!(mx.r_no_token().count(), 1);
        assert_eq!(mx.requests[1].redacted().authorization(), Some(REDACTED));
    }

    #[test]
    fn body_synthesis_oracle() {
        let schemas: BTreeMap<String, Value> = BTreeMap::from([(
            "Item".to_string(),
            json!({"type":"object","properties":{"id":{"type":"integer"}}}),
        )]);
        let cases = [
            (
                json!({"type":"object","properties":{"query":{"type":"string"}}}),
                json!({"query":"test"}),
            ),
            (json!({"type":"number"}), json!(0)),
            (
                json!({"type":"object","properties":{"on":{"type":"boolean"},"tags":{"type":"array","items":{"type":"string"}}}}),
                json!({"on":false,"tags":[]}),
            ),
            (
                json!({"properties":{"outer":{"type":"object","properties":{"n":{"type":"integer"},"s":{"type":"string"}}}}}),
                json!({"outer":{"n":0,"s":"test"}}),
            ),
            (
                json!({"type":"object","properties":{"item":{"$ref":"#/components/schemas/Item"}}}),
                json!({"item":{"id":0}}),
            ),
        ];
        for (schema, expected) in cases {
            assert_eq!(synthesize_value(&schema, &schemas), expected, "{schema}");
        }
    }

    #[test]
    fn self_referential_schema_terminates() {
        let schemas = BTreeMap::from([(
            "N".to_string(),
            json!({"type":"object","properties":{"next":{"$ref":"#/components/schemas/N"}}}),
        )]);
        let v = synthesize_value(&json!({"$ref":"#/components/schemas/N"}), &schemas);
        assert!(v.is_object());
    }

    #[test]
    fn path_and_query_parameters() {
        let m = manifest(r#"{"type":"none"}"#);
        let a = api(r#"{"/todos/{user}":{"get":{"parameters":[
            {"in":"path","name":"user","schema":{"type":"string"}},
            {"in":"query","name":"limit","required":true,"schema":{"type":"integer"}},
            {"in":"query","name":"opt","schema":{"type":"string"}}]}}}"#);
        let mx = build_probe_matrix(&PluginId("p".into()), &m, &a, DEFAULT_BUDGET);
        assert_eq!(mx.requests[0].full_url.as_str(), "https://x.io/todos/test?limit=0");
    }

    #[test]
    fn unresolvable_server_is_skipped() {
        let m = manifest(r#"{"type":"none"}"#);
        let doc = r#"{"openapi":"3.0.1","servers":[{"url":"https://x.io/{version}"}],"paths":{"/a":{"get":{}}}}"#;
        let a = parse_openapi(doc.as_bytes(), &Url::parse("https://x.io/o.json").unwrap()).unwrap();
        let mx = build_probe_matrix(&PluginId("p".into()), &m, &a, DEFAULT_BUDGET);
        assert!(mx.requests.is_empty());
        assert_eq!(mx.skipped[0].reason, SkipReason::UnresolvableServer);
    }

    #[test]
    fn budget_caps_whole_endpoints() {
        let m = manifest(r#"{"type":"service_http","verification_tokens":{"openai":"abc"}}"#);
        let paths: Vec<String> = (0..6).map(|i| format!(r#""/e{i}":{{"get":{{}}}}"#)).collect();
        let a = api(&format!("{{{}}}", paths.join(",")));
        let mx = build_probe_matrix(&PluginId("p".into()), &m, &a, DEFAULT_BUDGET);
        assert_eq!(mx.requests.len(), 12);
        assert_eq!(mx.skipped.len(), 2);
        assert!(mx.skipped.iter().all(|s| s.reason == SkipReason::BudgetExhausted));
    }
}
