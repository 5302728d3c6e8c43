//! Every listing of the generated plan, fetched over HTTP at its discovery
//! candidates, answers the way its accessibility profile says.

use std::collections::BTreeMap;
use std::net::SocketAddr;

use storeaudit_core::discovery::{generate_candidates, Verdict};
use storeaudit_core::domain::url_registrable_domain;
use storeaudit_core::manifest::parse_manifest;
use storeaudit_fixture::{generate_paper_plan, serve_fixtures, FixturePlugin};
use url::Url;

struct Hit {
    status: u16,
    location: Option<String>,
    body: Vec<u8>,
}

async fn get(client: &reqwest::Client, base: &str, logical: &Url) -> Hit {
    let host = match logical.port() {
        Some(p) => format!("{}:{p}", logical.host_str().unwrap()),
        None => logical.host_str().unwrap().to_string(),
    };
    let resp = client
        .get(format!("{base}{host}{}", logical.path()))
        .send()
        .await
        .unwrap();
    Hit {
        status: resp.status().as_u16(),
        location: resp
            .headers()
            .get("location")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
        body: resp.bytes().await.unwrap().to_vec(),
    }
}

fn seed(p: &FixturePlugin) -> Option<&str> {
    p.store.legal_info_url.as_deref()
}

#[tokio::test(flavor = "multi_thread")]
async fn candidates_answer_per_profile() {
    let plan = generate_paper_plan(42);
    let server = serve_fixtures(&plan, SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let base = server.base_url();
    let client = reqwest::Client::builder()
        .redirect(reqwest::redirect::Policy::none())
        .build()
        .unwrap();

    let mut seen: BTreeMap<Verdict, usize> = BTreeMap::new();
    for p in &plan.plugins {
        *seen.entry(p.accessibility_profile).or_default() += 1;
        let Some(candidates) = seed(p).and_then(|s| generate_candidates(s).ok()) else {
            assert_eq!(p.accessibility_profile, Verdict::NativeUnreachable, "{}", p.slug);
            continue;
        };
        let mut hits = Vec::new();
        for c in &candidates {
            hits.push((c, get(&client, &base, &c.url).await));
        }
        let manifest = hits
            .iter()
            .any(|(_, h)| h.status == 200 && parse_manifest(&h.body).is_ok());
        match p.accessibility_profile {
            Verdict::Accessible => assert!(manifest, "{}: no manifest served", p.slug),
            Verdict::HiddenRedirect => {
                assert!(!manifest, "{}", p.slug);
                assert!(hits.iter().any(|(_, h)| h.status != 404), "{}: only 404s", p.slug);
                for (c, h) in hits.iter().filter(|(_, h)| h.status == 302) {
                    let target = Url::parse(h.location.as_deref().unwrap()).unwrap();
                    assert_ne!(
                        url_registrable_domain(&target),
                        url_registrable_domain(&c.url),
                        "{}",
                        p.slug
                    );
                    let landing = get(&client, &base, &target).await;
                    assert_eq!(landing.status, 200);
                    assert!(String::from_utf8_lossy(&landing.body).contains("<html"));
                }
            }
            Verdict::OpenAIProtected => {
                assert!(!manifest, "{}", p.slug);
                assert!(hits.iter().all(|(_, h)| matches!(h.status, 403 | 404)), "{}", p.slug);
            }
            _ => {
                assert!(!manifest, "{}", p.slug);
                assert!(hits.iter().all(|(_, h)| h.status >= 400), "{}", p.slug);
            }
        }
    }
    let want: BTreeMap<Verdict, usize> = [
        (Verdict::Accessible, 373),
        (Verdict::HiddenRedirect, 104),
        (Verdict::OpenAIProtected, 12),
        (Verdict::HostedGoogleDoc, 6),
        (Verdict::HostedGitHub, 19),
        (Verdict::NativeUnreachable, 518),
    ]
    .into();
    assert_eq!(seen, want);
    server.shutdown().await;
}

#[tokio::test]
async fn static_responses_do_not_depend_on_request_order() {
    let plan = generate_paper_plan(42);
    let server = serve_fixtures(&plan, SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let base = server.base_url();
    let client = reqwest::Client::new();
    let p = plan
        .plugins
        .iter()
        .find(|p| p.accessibility_profile == Verdict::Accessible)
        .unwrap();
    let url = generate_candidates(seed(p).unwrap()).unwrap().remove(0).url;
    let first = get(&client, &base, &url).await;
    let _ = client.get(format!("{base}index.ndjson")).send().await.unwrap();
    let again = get(&client, &base, &url).await;
    assert_eq!((first.status, &first.body), (again.status, &again.body));
    server.shutdown().await;
}
