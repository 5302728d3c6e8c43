//! Polite HTTP fetch executor shared by discovery and probing.
//!
//! Requests to one logical host are serialized with a minimum spacing;
//! a global semaphore caps in-flight requests. Redirects are followed by
//! hand (the chain is recorded) so that an optional base-URL override can
//! route every hop, including cross-domain ones, to a local fixture server.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use url::Url;

use crate::canonical::sha256_hex;
use crate::config::AuditConfig;
use crate::manifest::HttpMethod;

pub const MAX_REDIRECTS: usize = 5;
/// Bodies are truncated to this many bytes.
pub const BODY_CAP: usize = 64 * 1024;
/// Response headers kept on a [`FetchResult`].
const KEPT_HEADERS: &[&str] = &[
    "content-type",
    "location",
    "retry-after",
    "www-authenticate",
    "x-ratelimit-remaining",
];

#[derive(Debug, Clone)]
pub struct FetchRequest {
    pub method: HttpMethod,
    pub url: Url,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl FetchRequest {
    pub fn get(url: Url) -> Self {
        FetchRequest {
            method: HttpMethod::Get,
            url,
            headers: Vec::new(),
            body: None,
        }
    }
}

/// One wire exchange (a redirect hop or a retry).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub url: Url,
    pub status: Option<u16>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchResult {
    pub requested_url: Url,
    /// URL of the last hop, after redirects.
    pub final_url: Url,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub redirect_chain: Vec<Url>,
    pub status: Option<u16>,
    pub transport_error: Option<String>,
    pub content_type: Option<String>,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    /// UTF-8 body, truncated to [`BODY_CAP`]; `None` when not valid UTF-8 or dropped.
    pub body: Option<String>,
    pub body_len: usize,
    pub body_sha256: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attempts: Vec<AttemptRecord>,
}

impl FetchResult {
    pub fn is_success(&self) -> bool {
        self.status.is_some_and(|s| (200..300).contains(&s))
    }

    pub fn body_str(&self) -> &str {
        self.body.as_deref().unwrap_or("")
    }

    /// Synthetic result for tests and replay.
    pub fn synthetic(url: Url, status: u16, content_type: Option<&str>, body: &str) -> Self {
        FetchResult {
            requested_url: url.clone(),
            final_url: url,
            redirect_chain: Vec::new(),
            status: Some(status),
            transport_error: None,
            content_type: content_type.map(str::to_string),
            headers: content_type
                .map(|ct| BTreeMap::from([("content-type".to_string(), ct.to_string())]))
                .unwrap_or_default(),
            body: Some(body.to_string()),
            body_len: body.len(),
            body_sha256: sha256_hex(body.as_bytes()),
            attempts: Vec::new(),
        }
    }

    pub fn transport_failure(url: Url, error: &str) -> Self {
        FetchResult {
            requested_url: url.clone(),
            final_url: url,
            redirect_chain: Vec::new(),
            status: None,
            transport_error: Some(error.to_string()),
            content_type: None,
            headers: BTreeMap::new(),
            body: None,
            body_len: 0,
            body_sha256: sha256_hex(b""),
            attempts: Vec::new(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot build HTTP client: {0}")]
pub struct ClientBuildError(#[from] reqwest::Error);

type HostSlot = Arc<tokio::sync::Mutex<Option<Instant>>>;

pub struct Fetcher {
    client: reqwest::Client,
    per_host_delay: Duration,
    retries: u32,
    retry_backoff: Duration,
    base_url_override: Option<Url>,
    global: Semaphore,
    hosts: Mutex<HashMap<String, HostSlot>>,
}

fn host_key(url: &Url) -> String {
    match (url.host_str(), url.port()) {
        (Some(h), Some(p)) => format!("{}:{p}", h.to_ascii_lowercase()),
        (Some(h), None) => h.to_ascii_lowercase(),
        _ => String::new(),
    }
}

struct Exchange {
    status: u16,
    headers: BTreeMap<String, String>,
    body: Vec<u8>,
}

impl Fetcher {
    pub fn new(config: &AuditConfig) -> Result<Self, ClientBuildError> {
        let client = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .timeout(Duration::from_millis(config.timeout_ms))
            .user_agent(concat!("storeaudit/", env!("CARGO_PKG_VERSION")))
            .build()?;
        Ok(Fetcher {
            client,
            per_host_delay: Duration::from_millis(config.per_host_delay_ms),
            retries: config.retries,
            retry_backoff: Duration::from_millis(config.retry_backoff_ms),
            base_url_override: config.base_url_override.clone(),
            global: Semaphore::new(config.max_concurrency as usize),
            hosts: Mutex::new(HashMap::new()),
        })
    }

    /// Wire URL for a logical URL: `{base}/{host[:port]}{path}?{query}` when
    /// an override is configured, the URL itself otherwise.
    pub fn physical_url(&self, logical: &Url) -> Url {
        let Some(base) = &self.base_url_override else {
            return logical.clone();
        };
        let mut raw = format!(
            "{}/{}{}",
            base.as_str().trim_end_matches('/'),
            host_key(logical),
            logical.path()
        );
        if let Some(q) = logical.query() {
            raw.push('?');
            raw.push_str(q);
        }
        Url::parse(&raw).unwrap_or_else(|_| logical.clone())
    }

    fn slot(&self, host: &str) -> HostSlot {
        let mut hosts = self.hosts.lock().expect("host table poisoned");
        hosts.entry(host.to_string()).or_default().clone()
    }

    async fn exchange(
        &self,
        method: HttpMethod,
        url: &Url,
        headers: &[(String, String)],
        body: Option<&str>,
    ) -> Result<Exchange, String> {
        let slot = self.slot(&host_key(url));
        let mut last = slot.lock().await;
        if let Some(prev) = *last {
            let ready = prev + self.per_host_delay;
            let now = Instant::now();
            if ready > now {
                tokio::time::sleep(ready - now).await;
            }
        }
        let _permit = self.global.acquire().await.map_err(|e| e.to_string())?;
        let started = Instant::now();
        let wire = self.physical_url(url);
        let mut req = self.client.request(
            reqwest::Method::from_bytes(method.as_str().as_bytes()).expect("static method"),
            wire,
        );
        for (k, v) in headers {
            req = req.header(k, v);
        }
        if let Some(b) = body {
            req = req.header("content-type", "application/json").body(b.to_string());
        }
        let result = async {
            let mut resp = req.send().await.map_err(|e| e.to_string())?;
            let status = resp.status().as_u16();
            let mut kept = BTreeMap::new();
            for name in KEPT_HEADERS {
                if let Some(v) = resp.headers().get(*name).and_then(|v| v.to_str().ok()) {
                    kept.insert((*name).to_string(), v.to_string());
                }
            }
            let mut buf = Vec::new();
            while let Some(chunk) = resp.chunk().await.map_err(|e| e.to_string())? {
                let room = BODY_CAP.saturating_sub(buf.len());
                buf.extend_from_slice(&chunk[..chunk.len().min(room)]);
                if buf.len() >= BODY_CAP {
                    break;
                }
            }
            Ok(Exchange {
                status,
                headers: kept,
                body: buf,
            })
        }
        .await;
        *last = Some(Instant::now());
        tracing::info!(
            target: "storeaudit::fetch",
            method = method.as_str(),
            url = %url,
            status = result.as_ref().ok().map(|e| e.status),
            error = result.as_ref().err().map(String::as_str),
            elapsed_ms = started.elapsed().as_millis() as u64,
            "fetch"
        );
        result
    }

    /// One logical exchange with retries (transport errors and 5xx without
    /// `Retry-After`), following at most [`MAX_REDIRECTS`] redirects.
    pub async fn fetch(&self, request: FetchRequest) -> FetchResult {
        let mut url = request.url.clone();
        let mut method = request.method;
        let mut body = request.body.clone();
        let mut chain = Vec::new();
        let mut attempts = Vec::new();
        loop {
            let mut tries = 0;
            let outcome = loop {
                let res = self.exchange(method, &url, &request.headers, body.as_deref()).await;
                attempts.push(AttemptRecord {
                    url: url.clone(),
                    status: res.as_ref().ok().map(|e| e.status),
                    error: res.as_ref().err().cloned(),
                });
                let retryable = match &res {
                    Err(_) => true,
                    Ok(e) => e.status >= 500 && !e.headers.contains_key("retry-after"),
                };
                if !retryable || tries >= self.retries {
                    break res;
                }
                tokio::time::sleep(self.retry_backoff * 2u32.pow(tries)).await;
                tries += 1;
            };
            let exchange = match outcome {
                Ok(e) => e,
                Err(error) => {
                    let mut r = FetchResult::transport_failure(request.url.clone(), &error);
                    r.final_url = url;
                    r.redirect_chain = chain;
                    r.attempts = attempts;
                    return r;
                }
            };
            let is_redirect = matches!(exchange.status, 301 | 302 | 303 | 307 | 308);
            if is_redirect && chain.len() < MAX_REDIRECTS {
                if let Some(next) = exchange.headers.get("location").and_then(|l| url.join(l).ok()) {
                    chain.push(url.clone());
                    if exchange.status == 303
                        || (exchange.status != 307 && exchange.status != 308 && method == HttpMethod::Post)
                    {
                        method = HttpMethod::Get;
                        body = None;
                    }
                    url = next;
                    continue;
                }
            }
            let text = String::from_utf8(exchange.body.clone()).ok();
            return FetchResult {
                requested_url: request.url,
                final_url: url,
                redirect_chain: chain,
                status: Some(exchange.status),
                transport_error: None,
                content_type: exchange.headers.get("content-type").cloned(),
                body_len: exchange.body.len(),
                body_sha256: sha256_hex(&exchange.body),
                headers: exchange.headers,
                body: text,
                attempts,
            };
        }
    }
}
