//! API authentication probing.
//!
//! Every endpoint of an exposed plugin is requested without a token, with
//! the manifest's own verification token (when it leaks one) and with a
//! fabricated token. Each response is scored as valid data or not, and the
//! (token required, token valid, valid data) triple maps to one of five
//! cases.

mod matrix;

use std::collections::BTreeMap;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use matrix::{
    build_probe_matrix, synthesize_value, variants_for, ProbeMatrix, ProbeRequest, SkipReason, SkippedEndpoint,
    DEFAULT_BUDGET, FABRICATED_TOKEN,
};

use crate::corpus::PluginId;
use crate::fetch::{FetchRequest, FetchResult, Fetcher};
use crate::manifest::{parse_openapi, AuthSpec, AuthType, Endpoint, HttpMethod, ManifestDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenVariant {
    NoToken,
    LeakedToken,
    FabricatedToken,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenCase {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
}

impl TokenCase {
    pub const ALL: [TokenCase; 5] = [
        TokenCase::Case1,
        TokenCase::Case2,
        TokenCase::Case3,
        TokenCase::Case4,
        TokenCase::Case5,
    ];

    /// Higher is worse: an authorization flaw outranks a replayable leaked
    /// token, which outranks an open API.
    pub fn severity(self) -> u8 {
        match self {
            TokenCase::Case3 => 4,
            TokenCase::Case1 => 3,
            TokenCase::Case4 => 2,
            TokenCase::Case2 => 1,
            TokenCase::Case5 => 0,
        }
    }

    /// Whether the plugin yielded valid data to an outside caller.
    pub fn retrieved_data(self) -> bool {
        matches!(self, TokenCase::Case1 | TokenCase::Case3 | TokenCase::Case4)
    }

    pub fn description(self) -> &'static str {
        match self {
            TokenCase::Case1 => "Token required, valid token, data returned: high risk of data leakage",
            TokenCase::Case2 => "Token required, request failed: protected",
            TokenCase::Case3 => "Token required, data returned without a valid token: authorization flaw",
            TokenCase::Case4 => "No token required, data returned: open API",
            TokenCase::Case5 => "No token required, request failed",
        }
    }
}

/// Maps one (token required, token valid, valid data) triple to a case.
pub fn classify_case(t_r: u8, t_v: u8, o: u8) -> TokenCase {
    match (t_r != 0, t_v != 0, o != 0) {
        (true, true, true) => TokenCase::Case1,
        (true, _, false) => TokenCase::Case2,
        (true, false, true) => TokenCase::Case3,
        (false, _, true) => TokenCase::Case4,
        (false, _, false) => TokenCase::Case5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureCause {
    LackAuthorization,
    ClientError,
    RateLimited,
    #[serde(rename = "None")]
    NoFailure,
}

impl FailureCause {
    pub const FAILURES: [FailureCause; 3] = [
        FailureCause::LackAuthorization,
        FailureCause::ClientError,
        FailureCause::RateLimited,
    ];
}

/// Body phrases that indicate throttling, matched case-insensitively.
pub const RATE_LIMIT_PHRASES: &[&str] = &[
    "rate limit",
    "rate-limit",
    "ratelimit",
    "too many requests",
    "quota exceeded",
    "throttl",
    "slow down",
];

/// Cause of a request that did not return valid data, plus whether the
/// failure originated on the server side (5xx, timeout, unusable 2xx).
pub fn classify_failure(
    status: Option<u16>,
    headers: &BTreeMap<String, String>,
    body_prefix: &str,
) -> (FailureCause, bool) {
    let lower = body_prefix.to_lowercase();
    let rate_limited = status == Some(429)
        || headers.keys().any(|k| k.eq_ignore_ascii_case("retry-after"))
        || RATE_LIMIT_PHRASES.iter().any(|p| lower.contains(p));
    match status {
        Some(401 | 403) => (FailureCause::LackAuthorization, false),
        _ if rate_limited => (FailureCause::RateLimited, false),
        Some(s) if (400..500).contains(&s) => (FailureCause::ClientError, false),
        Some(s) if (300..400).contains(&s) => (FailureCause::ClientError, false),
        _ => (FailureCause::ClientError, true),
    }
}

fn json_type_matches(schema: &Value, body: &Value) -> bool {
    let ty = schema.get("type").and_then(Value::as_str);
    let ty = ty.or_else(|| schema.get("properties").map(|_| "object"));
    match ty {
        Some("object") => {
            let Some(obj) = body.as_object() else { return false };
            schema
                .get("required")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
                .all(|k| obj.contains_key(k))
        }
        Some("array") => body.is_array(),
        Some("string") => body.is_string(),
        Some("integer") => body.is_i64() || body.is_u64(),
        Some("number") => body.is_number(),
        Some("boolean") => body.is_boolean(),
        _ => true,
    }
}

/// True iff the response is 2xx with a nonempty structured body whose top
/// level matches the endpoint's response schema (when one is declared).
pub fn evaluate_outcome(response: &FetchResult, endpoint: &Endpoint) -> bool {
    if !response.is_success() {
        return false;
    }
    let body = response.body_str().trim();
    if body.is_empty() {
        return false;
    }
    let Ok(parsed) = serde_json::from_str::<Value>(body) else {
        return false;
    };
    endpoint
        .response_schema
        .as_ref()
        .is_none_or(|schema| json_type_matches(schema, &parsed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub request: ProbeRequest,
    pub response: FetchResult,
    pub http_status: Option<u16>,
    pub valid_data: bool,
    pub t_r: u8,
    pub t_v: u8,
    pub token_case: TokenCase,
    pub failure_cause: FailureCause,
    #[serde(default)]
    pub server_side: bool,
}

/// Scores one recorded exchange. Pure, so replaying recorded responses
/// reproduces outcomes exactly.
pub fn score(auth: &AuthSpec, request: ProbeRequest, response: FetchResult) -> ProbeOutcome {
    let valid_data = evaluate_outcome(&response, &request.endpoint);
    let t_r = u8::from(auth.auth_type.requires_token());
    let t_v = u8::from(request.token_variant == TokenVariant::LeakedToken && !auth.verification_tokens.is_empty());
    let (failure_cause, server_side) = if valid_data {
        (FailureCause::NoFailure, false)
    } else {
        classify_failure(response.status, &response.headers, response.body_str())
    };
    ProbeOutcome {
        token_case: classify_case(t_r, t_v, u8::from(valid_data)),
        http_status: response.status,
        request,
        response,
        valid_data,
        t_r,
        t_v,
        failure_cause,
        server_side,
    }
}

/// Most severe per-request case; order-independent.
pub fn classify_plugin_case(outcomes: &[ProbeOutcome]) -> Option<TokenCase> {
    outcomes.iter().map(|o| o.token_case).max_by_key(|c| c.severity())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenFamily {
    NoToken,
    OAuth,
    Bearer,
    UserBearer,
}

impl TokenFamily {
    pub const ALL: [TokenFamily; 4] = [
        TokenFamily::NoToken,
        TokenFamily::OAuth,
        TokenFamily::Bearer,
        TokenFamily::UserBearer,
    ];

    pub fn of(auth_type: AuthType) -> Self {
        match auth_type {
            AuthType::None => TokenFamily::NoToken,
            AuthType::OAuth => TokenFamily::OAuth,
            AuthType::ServiceBearer => TokenFamily::Bearer,
            AuthType::UserBearer => TokenFamily::UserBearer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyStats {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Full-precision percentage; 0 when `total` is 0.
    pub success_rate_pct: f64,
}

impl FamilyStats {
    pub fn rendered_rate(&self) -> String {
        format!("{}%", fmt_1dp(self.success_rate_pct))
    }
}

/// Rounds half away from zero to one decimal and formats it.
pub fn fmt_1dp(x: f64) -> String {
    let r = (x * 10.0).round() / 10.0;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.1}")
}

pub type TokenTypeSummary = BTreeMap<TokenFamily, FamilyStats>;

/// Per-family totals over probed plugins. Families with no plugins are omitted.
pub fn summarize_token_types<'a>(plugins: impl IntoIterator<Item = (&'a AuthSpec, TokenCase)>) -> TokenTypeSummary {
    let mut tallies: BTreeMap<TokenFamily, (usize, usize)> = BTreeMap::new();
    for (auth, case) in plugins {
        let t = tallies.entry(TokenFamily::of(auth.auth_type)).or_default();
        t.0 += 1;
        t.1 += usize::from(case.retrieved_data());
    }
    tallies
        .into_iter()
        .map(|(family, (total, succeeded))| {
            let rate = if total == 0 {
                0.0
            } else {
                succeeded as f64 / total as f64 * 100.0
            };
            (
                family,
                FamilyStats {
                    total,
                    succeeded,
                    failed: total - succeeded,
                    success_rate_pct: rate,
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnprobeableReason {
    ApiUnreachable,
    ApiSyntaxError,
    EmptyApi,
    AllEndpointsSkipped,
}

/// Per-endpoint aggregate: valid if any variant returned valid data; the
/// failure cause is taken from the tokenless request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointResult {
    pub path: String,
    pub method: HttpMethod,
    pub valid_data: bool,
    pub failure_cause: FailureCause,
}

pub fn endpoint_results(outcomes: &[ProbeOutcome]) -> Vec<EndpointResult> {
    let mut out: Vec<EndpointResult> = Vec::new();
    for o in outcomes {
        let key = (&o.request.endpoint.path, o.request.endpoint.method);
        let idx = match out.iter().position(|e| (&e.path, e.method) == key) {
            Some(i) => i,
            None => {
                out.push(EndpointResult {
                    path: o.request.endpoint.path.clone(),
                    method: o.request.endpoint.method,
                    valid_data: false,
                    failure_cause: o.failure_cause,
                });
                out.len() - 1
            }
        };
        let e = &mut out[idx];
        e.valid_data |= o.valid_data;
        if o.request.token_variant == TokenVariant::NoToken {
            e.failure_cause = o.failure_cause;
        }
    }
    for e in &mut out {
        if e.valid_data {
            e.failure_cause = FailureCause::NoFailure;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginProbe {
    pub plugin_id: PluginId,
    pub auth: AuthSpec,
    pub api_status: Option<u16>,
    pub unprobeable: Option<UnprobeableReason>,
    pub skipped: Vec<SkippedEndpoint>,
    pub outcomes: Vec<ProbeOutcome>,
    pub endpoints: Vec<EndpointResult>,
    pub plugin_case: Option<TokenCase>,
}

impl PluginProbe {
    /// Recomputes every outcome and the plugin case from recorded exchanges.
    pub fn replay(&self) -> PluginProbe {
        let outcomes: Vec<ProbeOutcome> = self
            .outcomes
            .iter()
            .map(|o| score(&self.auth, o.request.clone(), o.response.clone()))
            .collect();
        PluginProbe {
            endpoints: endpoint_results(&outcomes),
            plugin_case: classify_plugin_case(&outcomes),
            outcomes,
            ..self.clone()
        }
    }
}

/// One wire exchange as written to the probe transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub plugin_id: PluginId,
    pub request_index: usize,
    pub attempt: usize,
    pub token_variant: TokenVariant,
    pub request_line: String,
    pub endpoint: String,
    pub headers: BTreeMap<String, String>,
    pub status: Option<u16>,
    pub error: Option<String>,
    pub body_sha256: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub budget: usize,
    pub redact_tokens: bool,
    pub in_flight: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            budget: DEFAULT_BUDGET,
            redact_tokens: true,
            in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeRun {
    /// Sorted by plugin id.
    pub plugins: Vec<PluginProbe>,
    pub transcript: Vec<TranscriptEntry>,
}

fn transcript_for(
    plugin_id: &PluginId,
    index: usize,
    request: &ProbeRequest,
    response: &FetchResult,
) -> Vec<TranscriptEntry> {
    let headers: BTreeMap<String, String> = request.headers.iter().cloned().collect();
    let last = response.attempts.len().saturating_sub(1);
    response
        .attempts
        .iter()
        .enumerate()
        .map(|(i, a)| TranscriptEntry {
            plugin_id: plugin_id.clone(),
            request_index: index,
            attempt: i,
            token_variant: request.token_variant,
            request_line: format!("{} {} HTTP/1.1", request.endpoint.method, a.url),
            endpoint: format!("{} {}", request.endpoint.method, request.full_url),
            headers: headers.clone(),
            status: a.status,
            error: a.error.clone(),
            body_sha256: (i == last).then(|| response.body_sha256.clone()),
        })
        .collect()
}

async fn probe_one(
    fetcher: &Fetcher,
    plugin_id: &PluginId,
    manifest: &ManifestDocument,
    opts: ProbeOptions,
) -> (PluginProbe, Vec<TranscriptEntry>) {
    let mut probe = PluginProbe {
        plugin_id: plugin_id.clone(),
        auth: manifest.auth.clone(),
        api_status: None,
        unprobeable: None,
        skipped: Vec::new(),
        outcomes: Vec::new(),
        endpoints: Vec::new(),
        plugin_case: None,
    };
    let mut transcript = Vec::new();
    let api_doc = fetcher.fetch(FetchRequest::get(manifest.api.url.clone())).await;
    probe.api_status = api_doc.status;
    if !api_doc.is_success() {
        probe.unprobeable = Some(UnprobeableReason::ApiUnreachable);
        return (probe, transcript);
    }
    let api = match parse_openapi(api_doc.body_str().as_bytes(), &api_doc.final_url) {
        Ok(api) => api,
        Err(_) => {
            probe.unprobeable = Some(UnprobeableReason::ApiSyntaxError);
            return (probe, transcript);
        }
    };
    if api.is_empty_api() {
        probe.unprobeable = Some(UnprobeableReason::EmptyApi);
        return (probe, transcript);
    }
    let matrix = build_probe_matrix(plugin_id, manifest, &api, opts.budget);
    probe.skipped = matrix.skipped.clone();
    if matrix.requests.is_empty() {
        probe.unprobeable = Some(UnprobeableReason::AllEndpointsSkipped);
        return (probe, transcript);
    }

    let mut throttled: Option<(String, HttpMethod)> = None;
    for (index, request) in matrix.requests.into_iter().enumerate() {
        let key = (request.endpoint.path.clone(), request.endpoint.method);
        if throttled.as_ref() == Some(&key) {
            continue;
        }
        let response = fetcher
            .fetch(FetchRequest {
                method: request.endpoint.method,
                url: request.full_url.clone(),
                headers: request.headers.clone(),
                body: request.body.as_ref().map(Value::to_string),
            })
            .await;
        let recorded = if opts.redact_tokens {
            request.redacted()
        } else {
            request.clone()
        };
        transcript.extend(transcript_for(plugin_id, index, &recorded, &response));
        let outcome = score(&manifest.auth, recorded, response);
        if outcome.failure_cause == FailureCause::RateLimited {
            throttled = Some(key);
        }
        probe.outcomes.push(outcome);
    }
    probe.endpoints = endpoint_results(&probe.outcomes);
    probe.plugin_case = classify_plugin_case(&probe.outcomes);
    (probe, transcript)
}

/// Probes every plugin with a parsed manifest, `opts.in_flight` at a time.
pub async fn run_probe(
    manifests: &BTreeMap<PluginId, ManifestDocument>,
    fetcher: &Fetcher,
    opts: ProbeOptions,
) -> ProbeRun {
    let mut results: Vec<(PluginProbe, Vec<TranscriptEntry>)> = stream::iter(manifests)
        .map(|(id, m)| probe_one(fetcher, id, m, opts))
        .buffer_unordered(opts.in_flight.max(1))
        .collect()
        .await;
    results.sort_by(|a, b| a.0.plugin_id.cmp(&b.0.plugin_id));
    let mut run = ProbeRun::default();
    for (p, t) in results {
        run.plugins.push(p);
        run.transcript.extend(t);
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;
    use url::Url;

    #[test]
    fn all_eight_triples() {
        let table = [
            ((0, 0, 0), TokenCase::Case5),
            ((0, 0, 1), TokenCase::Case4),
            ((0, 1, 0), TokenCase::Case5),
            ((0, 1, 1), TokenCase::Case4),
            ((1, 0, 0), TokenCase::Case2),
            ((1, 0, 1), TokenCase::Case3),
            ((1, 1, 0), TokenCase::Case2),
            ((1, 1, 1), TokenCase::Case1),
        ];
        for ((r, v, o), case) in table {
            assert_eq!(classify_case(r, v, o), case, "({r},{v},{o})");
        }
    }

    fn endpoint(schema: Option<Value>) -> Endpoint {
        Endpoint {
            path: "/x".into(),
            method: HttpMethod::Get,
            parameters: vec![],
            request_schema: None,
            response_schema: schema,
        }
    }

    fn resp(status: u16, body: &str) -> FetchResult {
        FetchResult::synthetic(
            Url::parse("https://a.io/x").unwrap(),
            status,
            Some("application/json"),
            body,
        )
    }

    #[test]
    fn outcome_evaluation() {
        let schema = json!({"type":"object","required":["items"],"properties":{"items":{"type":"array"}}});
        assert!(evaluate_outcome(
            &resp(200, r#"{"items":[]}"#),
            &endpoint(Some(schema.clone()))
        ));
        assert!(!evaluate_outcome(
            &resp(200, r#"{"other":1}"#),
            &endpoint(Some(schema.clone()))
        ));
        assert!(!evaluate_outcome(&resp(200, r#"[1]"#), &endpoint(Some(schema))));
        assert!(!evaluate_outcome(&resp(200, ""), &endpoint(None)));
        assert!(!evaluate_outcome(
            &resp(401, r#"{"error":"unauthorized"}"#),
            &endpoint(None)
        ));
        assert!(!evaluate_outcome(&resp(200, "<html></html>"), &endpoint(None)));
        assert!(evaluate_outcome(&resp(204, "[]"), &endpoint(None)));
    }

    #[test]
    fn failure_causes() {
        let none = BTreeMap::new();
        assert_eq!(
            classify_failure(Some(401), &none, ""),
            (FailureCause::LackAuthorization, false)
        );
        assert_eq!(
            classify_failure(Some(403), &none, ""),
            (FailureCause::LackAuthorization, false)
        );
        assert_eq!(
            classify_failure(Some(429), &none, ""),
            (FailureCause::RateLimited, false)
        );
        assert_eq!(
            classify_failure(Some(400), &none, ""),
            (FailureCause::ClientError, false)
        );
        assert_eq!(
            classify_failure(Some(503), &none, ""),
            (FailureCause::ClientError, true)
        );
        assert_eq!(classify_failure(None, &none, ""), (FailureCause::ClientError, true));
        let retry = BTreeMap::from([("retry-after".to_string(), "30".to_string())]);
        assert_eq!(classify_failure(Some(503), &retry, "").0, FailureCause::RateLimited);
        assert_eq!(
            classify_failure(Some(400), &none, "Rate limit exceeded").0,
            FailureCause::RateLimited
        );
    }

    #[test]
    fn token_type_rates() {
        let mk = |t| AuthSpec {
            auth_type: t,
            ..AuthSpec::none()
        };
        let (none, oauth, bearer) = (mk(AuthType::None), mk(AuthType::OAuth), mk(AuthType::ServiceBearer));
        let mut rows = Vec::new();
        rows.extend((0..239).map(|i| (&none, if i < 141 { TokenCase::Case4 } else { TokenCase::Case5 })));
        rows.extend((0..70).map(|i| (&oauth, if i < 27 { TokenCase::Case3 } else { TokenCase::Case2 })));
        rows.extend((0..34).map(|i| (&bearer, if i < 5 { TokenCase::Case1 } else { TokenCase::Case2 })));
        let s = summarize_token_types(rows);
        assert_eq!(s[&TokenFamily::NoToken].rendered_rate(), "59.0%");
        assert_eq!(s[&TokenFamily::OAuth].rendered_rate(), "38.6%");
        assert_eq!(s[&TokenFamily::Bearer].rendered_rate(), "14.7%");
        assert_eq!(s[&TokenFamily::Bearer].failed, 29);
        // oracle: integer arithmetic on tenths of a percent
        for (fam, num, den) in [
            (TokenFamily::NoToken, 141u64, 239u64),
            (TokenFamily::OAuth, 27, 70),
            (TokenFamily::Bearer, 5, 34),
        ] {
            let tenths = (num * 2000 + den) / (2 * den);
            assert_eq!(s[&fam].rendered_rate(), format!("{}.{}%", tenths / 10, tenths % 10));
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(fmt_1dp(-23.35), "-23.4");
        assert_eq!(fmt_1dp(37.25), "37.3");
        assert_eq!(fmt_1dp(-0.04), "0.0");
        assert_eq!(fmt_1dp(-40.0), "-40.0");
    }

    fn outcome_with_case(case: TokenCase) -> ProbeOutcome {
        let (r, v, o) = match case {
            TokenCase::Case1 => (1, 1, 1),
            TokenCase::Case2 => (1, 0, 0),
            TokenCase::Case3 => (1, 0, 1),
            TokenCase::Case4 => (0, 0, 1),
            TokenCase::Case5 => (0, 0, 0),
        };
        let request = ProbeRequest {
            endpoint: endpoint(None),
            full_url: Url::parse("https://a.io/x").unwrap(),
            token_variant: TokenVariant::NoToken,
            headers: vec![],
            body: None,
        };
        ProbeOutcome {
            request,
            response: resp(200, "{}"),
            http_status: Some(200),
            valid_data: o == 1,
            t_r: r,
            t_v: v,
            token_case: classify_case(r, v, o),
            failure_cause: FailureCause::NoFailure,
            server_side: false,
        }
    }

    #[test]
    fn plugin_case_examples() {
        let mixed = [outcome_with_case(TokenCase::Case3), outcome_with_case(TokenCase::Case1)];
        assert_eq!(classify_plugin_case(&mixed), Some(TokenCase::Case3));
        let closed = [outcome_with_case(TokenCase::Case5), outcome_with_case(TokenCase::Case5)];
        assert_eq!(classify_plugin_case(&closed), Some(TokenCase::Case5));
        assert_eq!(classify_plugin_case(&[]), None);
    }

    #[test]
    fn two_outcome_combinations_are_order_independent() {
        let order = [
            TokenCase::Case5,
            TokenCase::Case2,
            TokenCase::Case4,
            TokenCase::Case1,
            TokenCase::Case3,
        ];
        for a in TokenCase::ALL {
            for b in TokenCase::ALL {
                let ab = classify_plugin_case(&[outcome_with_case(a), outcome_with_case(b)]).unwrap();
                let ba = classify_plugin_case(&[outcome_with_case(b), outcome_with_case(a)]).unwrap();
                assert_eq!(ab, ba);
                let rank = |c| order.iter().position(|x| *x == c).unwrap();
                assert_eq!(ab, if rank(a) >= rank(b) { a } else { b });
            }
        }
    }

    #[test]
    fn scoring_derives_t_r_and_t_v() {
        let mut auth = AuthSpec {
            auth_type: AuthType::ServiceBearer,
            ..AuthSpec::none()
        };
        auth.verification_tokens.insert("openai".into(), "abc".into());
        let mut req = outcome_with_case(TokenCase::Case1).request;
        req.token_variant = TokenVariant::LeakedToken;
        req.headers = vec![("Authorization".into(), "Bearer abc".into())];
        let o = score(&auth, req.clone(), resp(200, "{}"));
        assert_eq!((o.t_r, o.t_v, o.token_case), (1, 1, TokenCase::Case1));
        let o = score(&auth, req, resp(401, "{}"));
        assert_eq!(
            (o.token_case, o.failure_cause),
            (TokenCase::Case2, FailureCause::LackAuthorization)
        );
        assert!(!o.valid_data);
    }

    proptest! {
        #[test]
        fn plugin_case_is_permutation_invariant(cases in prop::collection::vec(0usize..5, 1..10), seed in any::<u64>()) {
            let outcomes: Vec<_> = cases.iter().map(|&i| outcome_with_case(TokenCase::ALL[i])).collect();
            let mut shuffled = outcomes.clone();
            // deterministic Fisher-Yates driven by the seed
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(classify_plugin_case(&outcomes), classify_plugin_case(&shuffled));
        }

        #[test]
        fn valid_data_implies_no_failure(status in 100u16..600, body in "\\PC{0,20}") {
            let auth = AuthSpec::none();
            let o = score(&auth, outcome_with_case(TokenCase::Case4).request, resp(status, &body));
            prop_assert!(!o.valid_data || o.failure_cause == FailureCause::NoFailure);
            prop_assert!(o.valid_data || o.failure_cause != FailureCause::NoFailure);
        }
    }
}
