//! Typed views of plugin manifests (`ai-plugin.json`) and their OpenAPI
//! descriptions.
//!
//! Parsing is lenient: unknown fields are ignored and nonconforming but
//! usable documents are kept with [`ManifestFlag`]s attached, so the report
//! can count irregular manifests instead of silently dropping them.

pub(crate) mod openapi;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use url::Url;

use crate::canonical::{sha256_hex, to_canonical_compact};
use crate::domain::parse_absolute;

pub use openapi::{parse_openapi, Endpoint, HttpMethod, OpenApiDescription, OpenApiFlag, Parameter, ParameterLocation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("missing required field {0:?}")]
    MissingField(String),
    #[error("invalid field {field:?}: {detail}")]
    InvalidField { field: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuthType {
    None,
    ServiceBearer,
    UserBearer,
    OAuth,
}

impl AuthType {
    /// Whether the manifest declares that a token is required (Tr).
    pub fn requires_token(self) -> bool {
        self != AuthType::None
    }

    fn from_manifest(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Some(AuthType::None),
            "service_http" | "service" | "bearer" => Some(AuthType::ServiceBearer),
            "user_http" | "user" => Some(AuthType::UserBearer),
            "oauth" | "oauth2" => Some(AuthType::OAuth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestFlag {
    /// OAuth declared without an authorization URL.
    OauthIncomplete,
    /// `auth.type` not one of the documented values; treated as user bearer.
    AuthTypeUnrecognized,
    /// `auth.type` is none but scope or tokens were present and dropped.
    AuthFieldsIgnored,
    LegalUrlInvalid,
    LogoUrlInvalid,
    ApiTypeNotOpenapi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthSpec {
    pub auth_type: AuthType,
    pub scope: Option<String>,
    /// Provider → token. Bare-string tokens land under `"openai"`.
    pub verification_tokens: BTreeMap<String, String>,
    pub authorization_url: Option<Url>,
}

impl AuthSpec {
    pub fn none() -> Self {
        AuthSpec {
            auth_type: AuthType::None,
            scope: None,
            verification_tokens: BTreeMap::new(),
            authorization_url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSpec {
    pub api_type: String,
    pub url: Url,
    pub is_user_authenticated: bool,
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestDocument {
    pub name_for_human: String,
    pub name_for_model: String,
    pub description_for_human: Option<String>,
    pub description_for_model: Option<String>,
    pub auth: AuthSpec,
    pub api: ApiSpec,
    pub legal_info_url: Option<Url>,
    pub logo_url: Option<Url>,
    pub contact_email: Option<String>,
    #[serde(default)]
    pub flags: Vec<ManifestFlag>,
    /// Verbatim bytes the document was parsed from.
    #[serde(skip)]
    pub raw_source: Vec<u8>,
}

impl fmt::Debug for ManifestDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifestDocument")
            .field("name_for_human", &self.name_for_human)
            .field("name_for_model", &self.name_for_model)
            .field("auth", &self.auth.auth_type)
            .field("api", &self.api.url.as_str())
            .field("flags", &self.flags)
            .finish_non_exhaustive()
    }
}

fn text(obj: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    obj.get(key)
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

fn required_text(obj: &serde_json::Map<String, Value>, key: &str) -> Result<String, ParseError> {
    text(obj, key).ok_or_else(|| ParseError::MissingField(key.to_string()))
}

fn optional_url(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    flag: ManifestFlag,
    flags: &mut Vec<ManifestFlag>,
) -> Option<Url> {
    let raw = text(obj, key)?;
    let url = parse_absolute(&raw);
    if url.is_none() {
        flags.push(flag);
    }
    url
}

fn parse_auth(block: Option<&Value>, flags: &mut Vec<ManifestFlag>) -> AuthSpec {
    let Some(obj) = block.and_then(Value::as_object) else {
        return AuthSpec::none();
    };
    let raw_type = text(obj, "type").or_else(|| text(obj, "authorization_type"));
    let auth_type = match raw_type.as_deref() {
        None => AuthType::None,
        Some(raw) => AuthType::from_manifest(raw).unwrap_or_else(|| {
            flags.push(ManifestFlag::AuthTypeUnrecognized);
            AuthType::UserBearer
        }),
    };
    let scope = match obj.get("scope") {
        Some(Value::String(s)) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Some(Value::Array(items)) => {
            let joined: Vec<&str> = items.iter().filter_map(Value::as_str).collect();
            (!joined.is_empty()).then(|| joined.join(" "))
        }
        _ => None,
    };
    let mut verification_tokens = BTreeMap::new();
    match obj.get("verification_tokens") {
        Some(Value::Object(map)) => {
            for (provider, token) in map {
                if let Some(t) = token.as_str().filter(|t| !t.is_empty()) {
                    verification_tokens.insert(provider.clone(), t.to_string());
                }
            }
        }
        Some(Value::String(t)) if !t.is_empty() => {
            verification_tokens.insert("openai".to_string(), t.clone());
        }
        _ => {}
    }
    let authorization_url = text(obj, "authorization_url")
        .or_else(|| text(obj, "client_url"))
        .and_then(|u| parse_absolute(&u));

    if auth_type == AuthType::None {
        if scope.is_some() || !verification_tokens.is_empty() {
            flags.push(ManifestFlag::AuthFieldsIgnored);
        }
        return AuthSpec::none();
    }
    if auth_type == AuthType::OAuth && authorization_url.is_none() {
        flags.push(ManifestFlag::OauthIncomplete);
    }
    AuthSpec {
        auth_type,
        scope,
        verification_tokens,
        authorization_url,
    }
}

/// Parses manifest bytes. Total: every input yields a document or a typed error.
pub fn parse_manifest(bytes: &[u8]) -> Result<ManifestDocument, ParseError> {
    let tree: Value = serde_json::from_slice(bytes).map_err(|e| ParseError::Syntax(e.to_string()))?;
    let obj = tree
        .as_object()
        .ok_or_else(|| ParseError::Syntax("manifest is not a JSON object".into()))?;
    let name_for_human = required_text(obj, "name_for_human")?;
    let name_for_model = required_text(obj, "name_for_model")?;
    let mut flags = Vec::new();

    let api_obj = obj
        .get("api")
        .and_then(Value::as_object)
        .ok_or_else(|| ParseError::MissingField("api.url".into()))?;
    let api_raw = text(api_obj, "url").ok_or_else(|| ParseError::MissingField("api.url".into()))?;
    let api_url = parse_absolute(&api_raw).ok_or_else(|| ParseError::InvalidField {
        field: "api.url".into(),
        detail: format!("not an absolute http(s) URL: {api_raw:?}"),
    })?;
    let api_type = text(api_obj, "type").unwrap_or_else(|| "openapi".into());
    if !api_type.eq_ignore_ascii_case("openapi") {
        flags.push(ManifestFlag::ApiTypeNotOpenapi);
    }
    let api = ApiSpec {
        api_type,
        url: api_url,
        is_user_authenticated: api_obj
            .get("is_user_authenticated")
            .and_then(Value::as_bool)
            .unwrap_or(false),
    };

    let auth = parse_auth(obj.get("auth"), &mut flags);
    let legal_info_url = optional_url(obj, "legal_info_url", ManifestFlag::LegalUrlInvalid, &mut flags);
    let logo_url = optional_url(obj, "logo_url", ManifestFlag::LogoUrlInvalid, &mut flags);
    flags.sort();
    flags.dedup();

    Ok(ManifestDocument {
        name_for_human,
        name_for_model,
        description_for_human: text(obj, "description_for_human"),
        description_for_model: text(obj, "description_for_model"),
        auth,
        api,
        legal_info_url,
        logo_url,
        contact_email: text(obj, "contact_email"),
        flags,
        raw_source: bytes.to_vec(),
    })
}

/// SHA-256 digest of a manifest's canonicalized JSON.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ManifestFingerprint(pub String);

/// Digest over the canonical (sorted-key, whitespace-free) form of the raw
/// source, so key order and formatting do not affect equality.
pub fn manifest_fingerprint(m: &ManifestDocument) -> ManifestFingerprint {
    let canonical = serde_json::from_slice::<Value>(&m.raw_source)
        .ok()
        .and_then(|v| to_canonical_compact(&v).ok());
    match canonical {
        Some(text) => ManifestFingerprint(sha256_hex(text.as_bytes())),
        None => ManifestFingerprint(sha256_hex(&m.raw_source)),
    }
}
