//! URL and host helpers shared by discovery and consistency.

use url::Url;

/// Second-level suffixes under which the registrable domain takes three labels.
const MULTI_LABEL_SUFFIXES: &[&str] = &[
    "co.uk",
    "org.uk",
    "ac.uk",
    "gov.uk",
    "com.au",
    "net.au",
    "org.au",
    "co.jp",
    "ne.jp",
    "co.kr",
    "com.br",
    "com.cn",
    "com.tw",
    "com.hk",
    "co.in",
    "co.nz",
    "com.sg",
    "com.mx",
    "co.za",
    "github.io",
    "herokuapp.com",
    "vercel.app",
    "netlify.app",
    "pages.dev",
    "web.app",
    "azurewebsites.net",
    "onrender.com",
    "fly.dev",
    "repl.co",
];

/// Registrable domain ("eTLD+1") of a host, lowercased.
///
/// Uses a small built-in suffix list rather than the full public suffix list;
/// IP literals and single-label hosts are returned unchanged.
pub fn registrable_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host;
    }
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    if labels.len() <= 2 {
        return labels.join(".");
    }
    let last_two = labels[labels.len() - 2..].join(".");
    let take = if MULTI_LABEL_SUFFIXES.contains(&last_two.as_str()) {
        3
    } else {
        2
    };
    labels[labels.len() - take..].join(".")
}

/// Registrable domain of a URL's host, if it has one.
pub fn url_registrable_domain(url: &Url) -> Option<String> {
    url.host_str().map(registrable_domain)
}

/// True when `host` equals `domain` or is a subdomain of it.
pub fn host_matches(host: &str, domain: &str) -> bool {
    let host = host.to_ascii_lowercase();
    host == domain || host.ends_with(&format!(".{domain}"))
}

/// Comparison key for legal-document URLs: scheme-insensitive, host
/// case-insensitive, default ports dropped, trailing slash ignored.
/// Fragments are dropped; query strings are kept.
pub fn normalized_url_key(url: &Url) -> String {
    let host = url.host_str().unwrap_or("").to_ascii_lowercase();
    let port = match url.port() {
        Some(p) if p != 80 && p != 443 => format!(":{p}"),
        _ => String::new(),
    };
    let path = url.path().trim_end_matches('/');
    let query = url.query().map(|q| format!("?{q}")).unwrap_or_default();
    format!("{host}{port}{path}{query}")
}

/// Parses an absolute http(s) URL, rejecting relative or schemeless input.
pub fn parse_absolute(raw: &str) -> Option<Url> {
    let url = Url::parse(raw.trim()).ok()?;
    match url.scheme() {
        "http" | "https" if url.host_str().is_some_and(|h| !h.is_empty()) => Some(url),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registrable_domain_strips_subdomains() {
        assert_eq!(registrable_domain("WWW.MixerBox.com"), "mixerbox.com");
        assert_eq!(registrable_domain("a.b.example.co.uk"), "example.co.uk");
        assert_eq!(registrable_domain("chat.openai.com"), "openai.com");
        assert_eq!(registrable_domain("a.io"), "a.io");
        assert_eq!(registrable_domain("127.0.0.1"), "127.0.0.1");
        assert_eq!(registrable_domain("localhost"), "localhost");
    }

    #[test]
    fn legal_url_key_ignores_scheme_and_trailing_slash() {
        let a = Url::parse("http://a.io/legal/").unwrap();
        let b = Url::parse("https://A.io/legal").unwrap();
        assert_eq!(normalized_url_key(&a), normalized_url_key(&b));
        let c = Url::parse("https://a.io/privacy").unwrap();
        assert_ne!(normalized_url_key(&a), normalized_url_key(&c));
    }

    #[test]
    fn parse_absolute_rejects_relative() {
        assert!(parse_absolute("/legal").is_none());
        assert!(parse_absolute("a.io/legal").is_none());
        assert!(parse_absolute("mailto:x@a.io").is_none());
        assert!(parse_absolute("https://a.io/legal").is_some());
    }
}
