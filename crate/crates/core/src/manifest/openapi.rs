//! OpenAPI description parsing (JSON or YAML surface syntax).
//!
//! Schema nodes stay opaque `serde_json::Value` trees; only a single level of
//! local `$ref` is resolved when attaching request/response schemas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::Url;

use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HttpMethod {
    Get,
    Post,
    Put,
    Delete,
}

impl HttpMethod {
    pub const ALL: [HttpMethod; 4] = [HttpMethod::Get, HttpMethod::Post, HttpMethod::Put, HttpMethod::Delete];

    pub fn as_str(self) -> &'static str {
        match self {
            HttpMethod::Get => "GET",
            HttpMethod::Post => "POST",
            HttpMethod::Put => "PUT",
            HttpMethod::Delete => "DELETE",
        }
    }

    fn key(self) -> &'static str {
        match self {
            HttpMethod::Get => "get",
            HttpMethod::Post => "post",
            HttpMethod::Put => "put",
            HttpMethod::Delete => "delete",
        }
    }

    pub fn carries_body(self) -> bool {
        matches!(self, HttpMethod::Post | HttpMethod::Put)
    }
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterLocation {
    Path,
    Query,
    Header,
    Cookie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub location: ParameterLocation,
    pub required: bool,
    pub schema: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    /// Always begins with `/`.
    pub path: String,
    pub method: HttpMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<Parameter>,
    pub request_schema: Option<Value>,
    pub response_schema: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenApiFlag {
    /// The document declares no usable paths.
    EmptyApi,
    /// No `servers` block; the document's own origin was used.
    DefaultServer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenApiDescription {
    pub openapi_version: String,
    pub title: String,
    /// Absolute base URLs; never empty.
    pub servers: Vec<Url>,
    pub endpoints: Vec<Endpoint>,
    pub schemas: BTreeMap<String, Value>,
    #[serde(default)]
    pub flags: Vec<OpenApiFlag>,
}

impl OpenApiDescription {
    pub fn is_empty_api(&self) -> bool {
        self.endpoints.is_empty()
    }
}

fn parse_tree(bytes: &[u8]) -> Result<Value, ParseError> {
    if let Ok(v) = serde_json::from_slice::<Value>(bytes) {
        return Ok(v);
    }
    serde_yaml::from_slice::<Value>(bytes).map_err(|e| ParseError::Syntax(e.to_string()))
}

fn origin_of(url: &Url) -> Url {
    let mut origin = url.clone();
    origin.set_path("/");
    origin.set_query(None);
    origin.set_fragment(None);
    origin
}

/// Resolves `#/components/schemas/X` (or Swagger `#/definitions/X`) one level.
pub(crate) fn resolve_ref<'a>(node: &'a Value, schemas: &'a BTreeMap<String, Value>) -> &'a Value {
    let target = node
        .get("$ref")
        .and_then(Value::as_str)
        .and_then(|r| {
            r.strip_prefix("#/components/schemas/")
                .or_else(|| r.strip_prefix("#/definitions/"))
        })
        .and_then(|name| schemas.get(name));
    target.unwrap_or(node)
}

fn json_content_schema(content: Option<&Value>) -> Option<&Value> {
    let content = content?.as_object()?;
    content
        .iter()
        .find(|(ct, _)| ct.contains("json"))
        .or_else(|| content.iter().next())
        .and_then(|(_, media)| media.get("schema"))
}

fn response_schema(op: &Value) -> Option<&Value> {
    let responses = op.get("responses")?.as_object()?;
    let chosen = responses
        .iter()
        .filter(|(code, _)| code.starts_with('2'))
        .min_by(|a, b| a.0.cmp(b.0))
        .or_else(|| responses.get_key_value("default"))?
        .1;
    // OpenAPI 3 nests under content; Swagger 2 puts schema directly on the response
    json_content_schema(chosen.get("content")).or_else(|| chosen.get("schema"))
}

fn request_schema(op: &Value) -> Option<&Value> {
    if let Some(schema) = op
        .get("requestBody")
        .and_then(|b| json_content_schema(b.get("content")))
    {
        return Some(schema);
    }
    op.get("parameters")?
        .as_array()?
        .iter()
        .find(|p| p.get("in").and_then(Value::as_str) == Some("body"))
        .and_then(|p| p.get("schema"))
}

fn parse_parameters(list: Option<&Value>, out: &mut Vec<Parameter>) {
    let Some(items) = list.and_then(Value::as_array) else {
        return;
    };
    for p in items {
        let Some(name) = p.get("name").and_then(Value::as_str) else {
            continue;
        };
        let location = match p.get("in").and_then(Value::as_str) {
            Some("path") => ParameterLocation::Path,
            Some("query") => ParameterLocation::Query,
            Some("header") => ParameterLocation::Header,
            Some("cookie") => ParameterLocation::Cookie,
            _ => continue,
        };
        out.retain(|existing| !(existing.name == name && existing.location == location));
        out.push(Parameter {
            name: name.to_string(),
            location,
            required: location == ParameterLocation::Path
                || p.get("required").and_then(Value::as_bool).unwrap_or(false),
            schema: p
                .get("schema")
                .cloned()
                .or_else(|| p.get("type").map(|t| serde_json::json!({ "type": t }))),
        });
    }
}

fn servers(tree: &Value, origin: &Url) -> Vec<Url> {
    let mut out = Vec::new();
    if let Some(list) = tree.get("servers").and_then(Value::as_array) {
        for s in list {
            if let Some(raw) = s.get("url").and_then(Value::as_str) {
                if let Ok(url) = origin.join(raw.trim()) {
                    if matches!(url.scheme(), "http" | "https") {
                        out.push(url);
                    }
                }
            }
        }
    } else if let Some(host) = tree.get("host").and_then(Value::as_str) {
        let scheme = tree
            .get("schemes")
            .and_then(Value::as_array)
            .and_then(|s| s.first())
            .and_then(Value::as_str)
            .unwrap_or(origin.scheme());
        let base = tree.get("basePath").and_then(Value::as_str).unwrap_or("/");
        if let Ok(url) = Url::parse(&format!("{scheme}://{host}{base}")) {
            out.push(url);
        }
    }
    out
}

/// Parses an OpenAPI document fetched from `origin`.
pub fn parse_openapi(bytes: &[u8], origin: &Url) -> Result<OpenApiDescription, ParseError> {
    let tree = parse_tree(bytes)?;
    if !tree.is_object() {
        return Err(ParseError::Syntax("OpenAPI document is not a mapping".into()));
    }
    let openapi_version = tree.get("openapi").or_else(|| tree.get("swagger")).map(|v| match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    });
    if openapi_version.is_none() && tree.get("paths").is_none() {
        return Err(ParseError::Syntax(
            "neither an openapi version nor paths present".into(),
        ));
    }
    let title = tree
        .pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or("")
        .to_string();

    let schemas: BTreeMap<String, Value> = tree
        .pointer("/components/schemas")
        .or_else(|| tree.get("definitions"))
        .and_then(Value::as_object)
        .map(|m| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
        .unwrap_or_default();

    let mut flags = Vec::new();
    let mut servers = servers(&tree, origin);
    if servers.is_empty() {
        servers.push(origin_of(origin));
        flags.push(OpenApiFlag::DefaultServer);
    }

    let mut endpoints = Vec::new();
    if let Some(paths) = tree.get("paths").and_then(Value::as_object) {
        for (raw_path, item) in paths {
            let path = if raw_path.starts_with('/') {
                raw_path.clone()
            } else {
                format!("/{raw_path}")
            };
            let mut shared = Vec::new();
            parse_parameters(item.get("parameters"), &mut shared);
            for method in HttpMethod::ALL {
                let Some(op) = item.get(method.key()) else { continue };
                let mut parameters = shared.clone();
                parse_parameters(op.get("parameters"), &mut parameters);
                parameters.retain(|p| p.location != ParameterLocation::Cookie);
                endpoints.push(Endpoint {
                    path: path.clone(),
                    method,
                    parameters,
                    request_schema: request_schema(op).map(|s| resolve_ref(s, &schemas).clone()),
                    response_schema: response_schema(op).map(|s| resolve_ref(s, &schemas).clone()),
                });
            }
        }
    }
    if endpoints.is_empty() {
        flags.push(OpenApiFlag::EmptyApi);
    }
    Ok(OpenApiDescription {
        openapi_version: openapi_version.unwrap_or_default(),
        title,
        servers,
        endpoints,
        schemas,
        flags,
    })
}
