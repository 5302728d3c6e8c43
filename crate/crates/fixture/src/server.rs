//! HTTP server for a [`FixturePlan`].
//!
//! Every logical host is mounted under its own path prefix, so a request for
//! `https://shop.io/.well-known/ai-plugin.json` arrives as
//! `GET /shop.io/.well-known/ai-plugin.json`. Responses depend only on the
//! plan and each endpoint's request counter.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::State;
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::plan::{EndpointBehavior, FixturePlan, PlanError, ResponseSpec};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid plan: {0}")]
    Plan(#[from] PlanError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

enum Entry {
    Fixed(ResponseSpec),
    Endpoint(BTreeMap<String, (EndpointBehavior, AtomicU64)>),
}

struct ServerState {
    index: String,
    routes: BTreeMap<(String, String), Entry>,
    fallbacks: BTreeMap<String, ResponseSpec>,
    requests: AtomicU64,
}

impl ServerState {
    fn new(plan: &FixturePlan) -> Result<Self, PlanError> {
        let table = plan.validate()?;
        let routes = table
            .routes
            .into_iter()
            .map(|(key, spec)| {
                let entry = match spec {
                    ResponseSpec::Endpoint { methods } => Entry::Endpoint(
                        methods
                            .into_iter()
                            .map(|(m, b)| (m.to_ascii_uppercase(), (b, AtomicU64::new(0))))
                            .collect(),
                    ),
                    other => Entry::Fixed(other),
                };
                (key, entry)
            })
            .collect();
        Ok(ServerState {
            index: plan.render_index(),
            routes,
            fallbacks: table.fallbacks,
            requests: AtomicU64::new(0),
        })
    }
}

fn respond(status: u16, content_type: &str, body: String, headers: &BTreeMap<String, String>) -> Response {
    let mut b = Response::builder()
        .status(StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR))
        .header(header::CONTENT_TYPE, content_type);
    for (k, v) in headers {
        b = b.header(k.as_str(), v.as_str());
    }
    b.body(Body::from(body)).expect("static response parts are valid")
}

fn json(status: u16, body: &str) -> Response {
    respond(status, "application/json", body.to_string(), &BTreeMap::new())
}

fn fixed(spec: &ResponseSpec) -> Response {
    match spec {
        ResponseSpec::Static {
            status,
            content_type,
            body,
            headers,
        } => respond(*status, content_type, body.clone(), headers),
        ResponseSpec::Redirect { status, location } => {
            let headers = BTreeMap::from([("location".to_string(), location.clone())]);
            respond(*status, "text/plain", String::new(), &headers)
        }
        ResponseSpec::Endpoint { .. } => json(500, r#"{"error":"misconfigured"}"#),
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
}

fn endpoint(behavior: &EndpointBehavior, counter: &AtomicU64, headers: &HeaderMap) -> Response {
    let n = counter.fetch_add(1, Ordering::SeqCst);
    if behavior.rate_limit_after.is_some_and(|limit| n >= limit) {
        return json(429, r#"{"error":"too many requests"}"#);
    }
    let authorized =
        !behavior.honor_token || bearer(headers).is_some_and(|t| behavior.accepted_tokens.iter().any(|a| a == t));
    if !authorized {
        return json(401, r#"{"error":"unauthorized"}"#);
    }
    respond(
        behavior.status,
        &behavior.content_type,
        behavior.body.clone(),
        &BTreeMap::new(),
    )
}

/// Splits `/host/rest` into the logical host and path.
fn split_logical(path: &str) -> (String, String) {
    let trimmed = path.trim_start_matches('/');
    match trimmed.split_once('/') {
        Some((host, rest)) => (host.to_ascii_lowercase(), format!("/{rest}")),
        None => (trimmed.to_ascii_lowercase(), "/".to_string()),
    }
}

async fn index(State(state): State<Arc<ServerState>>) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    respond(200, "application/x-ndjson", state.index.clone(), &BTreeMap::new())
}

async fn dispatch(State(state): State<Arc<ServerState>>, method: Method, uri: Uri, headers: HeaderMap) -> Response {
    state.requests.fetch_add(1, Ordering::Relaxed);
    let (host, path) = split_logical(uri.path());
    let response = match state.routes.get(&(host.clone(), path.clone())) {
        Some(Entry::Fixed(spec)) => fixed(spec),
        Some(Entry::Endpoint(methods)) => match methods.get(method.as_str()) {
            Some((behavior, counter)) => endpoint(behavior, counter, &headers),
            None => json(405, r#"{"error":"method not allowed"}"#),
        },
        None => match state.fallbacks.get(&host) {
            Some(spec) => fixed(spec),
            None => json(404, r#"{"error":"not found"}"#),
        },
    };
    tracing::debug!(%method, host, path, status = response.status().as_u16(), "fixture request");
    response
}

/// Handle to a running fixture server; dropping it leaves the server running
/// until the runtime shuts down.
pub struct FixtureServer {
    addr: SocketAddr,
    state: Arc<ServerState>,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl FixtureServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to configure as the audit's base-URL override.
    pub fn base_url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    /// Requests served so far, across all routes.
    pub fn request_count(&self) -> u64 {
        self.state.requests.load(Ordering::Relaxed)
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = (&mut self.task).await;
    }

    /// Resolves when the server stops on its own.
    pub async fn wait(mut self) {
        let _ = (&mut self.task).await;
    }
}

/// Validates the plan, binds `addr` and serves in a background task.
/// Port 0 picks a free port.
pub async fn serve_fixtures(plan: &FixturePlan, addr: SocketAddr) -> Result<FixtureServer, ServeError> {
    let state = Arc::new(ServerState::new(plan)?);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    let addr = listener
        .local_addr()
        .map_err(|source| ServeError::Bind { addr, source })?;
    let app = Router::new()
        .route("/index.ndjson", get(index))
        .fallback(dispatch)
        .with_state(state.clone());
    let (stop, stopped) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let shutdown = async {
            let _ = stopped.await;
        };
        if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            tracing::error!(error = %e, "fixture server stopped");
        }
    });
    tracing::info!(%addr, plugins = plan.plugins.len(), "fixture server listening");
    Ok(FixtureServer {
        addr,
        state,
        stop: Some(stop),
        task,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::tests::tiny_plugin;
    use crate::plan::{PlanProfile, RouteSpec, DEFAULT_PORT, PLAN_SCHEMA_VERSION};

    fn plan_with(plugins: Vec<crate::plan::FixturePlugin>) -> FixturePlan {
        FixturePlan {
            schema_version: PLAN_SCHEMA_VERSION,
            profile: PlanProfile::PaperTables,
            seed: 0,
            listen_port: DEFAULT_PORT,
            plugins,
        }
    }

    #[test]
    fn logical_split() {
        assert_eq!(
            split_logical("/a.io/.well-known/ai-plugin.json"),
            ("a.io".into(), "/.well-known/ai-plugin.json".into())
        );
        assert_eq!(split_logical("/A.io"), ("a.io".into(), "/".into()));
        assert_eq!(split_logical("/a.io/"), ("a.io".into(), "/".into()));
    }

    #[test]
    fn rate_limit_counter_semantics() {
        let behavior = EndpointBehavior {
            status: 200,
            content_type: "application/json".into(),
            body: "{}".into(),
            honor_token: false,
            accepted_tokens: vec![],
            rate_limit_after: Some(3),
        };
        let counter = AtomicU64::new(0);
        let statuses: Vec<u16> = (0..5)
            .map(|_| endpoint(&behavior, &counter, &HeaderMap::new()).status().as_u16())
            .collect();
        assert_eq!(statuses, vec![200, 200, 200, 429, 429]);
    }

    #[test]
    fn token_checks() {
        let behavior = EndpointBehavior {
            status: 200,
            content_type: "application/json".into(),
            body: "{}".into(),
            honor_token: true,
            accepted_tokens: vec!["good".into()],
            rate_limit_after: None,
        };
        let counter = AtomicU64::new(0);
        let mut h = HeaderMap::new();
        assert_eq!(endpoint(&behavior, &counter, &h).status(), 401);
        h.insert(header::AUTHORIZATION, "Bearer bad".parse().unwrap());
        assert_eq!(endpoint(&behavior, &counter, &h).status(), 401);
        h.insert(header::AUTHORIZATION, "Bearer good".parse().unwrap());
        assert_eq!(endpoint(&behavior, &counter, &h).status(), 200);
        let open = EndpointBehavior {
            honor_token: false,
            ..behavior
        };
        assert_eq!(endpoint(&open, &counter, &HeaderMap::new()).status(), 200);
    }

    #[tokio::test]
    async fn serves_manifest_index_and_fallbacks() {
        let mut p = tiny_plugin("tiny");
        p.routes.push(RouteSpec {
            host: "tiny.io".into(),
            path: "/v1/items".into(),
            response: ResponseSpec::Endpoint {
                methods: BTreeMap::from([(
                    "GET".to_string(),
                    EndpointBehavior {
                        status: 200,
                        content_type: "application/json".into(),
                        body: r#"{"results":[]}"#.into(),
                        honor_token: false,
                        accepted_tokens: vec![],
                        rate_limit_after: Some(3),
                    },
                )]),
            },
        });
        p.fallbacks.push(crate::plan::HostFallback {
            host: "gone.io".into(),
            response: ResponseSpec::Redirect {
                status: 302,
                location: "https://landing.net/".into(),
            },
        });
        let server = serve_fixtures(&plan_with(vec![p]), "127.0.0.1:0".parse().unwrap())
            .await
            .unwrap();
        let base = server.base_url();
        let client = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::none())
            .build()
            .unwrap();
        let get = |path: &str| client.get(format!("{base}{path}")).send();

        let manifest = get("tiny.io/.well-known/ai-plugin.json").await.unwrap();
        assert_eq!(manifest.status(), 200);
        assert!(manifest.text().await.unwrap().contains("\"name_for_human\":\"Tiny\""));
        assert_eq!(
            get("index.ndjson").await.unwrap().text().await.unwrap().lines().count(),
            1
        );
        assert_eq!(get("tiny.io/missing").await.unwrap().status(), 404);
        let redirect = get("gone.io/anything").await.unwrap();
        assert_eq!(redirect.status(), 302);
        assert_eq!(redirect.headers()["location"], "https://landing.net/");
        let mut statuses = Vec::new();
        for _ in 0..4 {
            statuses.push(get("tiny.io/v1/items?q=test").await.unwrap().status().as_u16());
        }
        assert_eq!(statuses, vec![200, 200, 200, 429]);
        assert_eq!(
            client
                .post(format!("{base}tiny.io/v1/items"))
                .send()
                .await
                .unwrap()
                .status(),
            405
        );
        assert_eq!(server.request_count(), 9);
        server.shutdown().await;
    }

    #[tokio::test]
    async fn busy_port_is_a_startup_error() {
        let plan = plan_with(vec![tiny_plugin("tiny")]);
        let first = serve_fixtures(&plan, "127.0.0.1:0".parse().unwrap()).await.unwrap();
        let err = serve_fixtures(&plan, first.addr()).await.err().expect("port is taken");
        assert!(matches!(err, ServeError::Bind { .. }));
        first.shutdown().await;
    }
}
