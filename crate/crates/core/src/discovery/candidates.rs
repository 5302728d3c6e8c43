//! Candidate manifest URL generation from a seed link.

use serde::{Deserialize, Serialize};
use url::Url;

pub const WELL_KNOWN_MANIFEST: &str = ".well-known/ai-plugin.json";
pub const WELL_KNOWN_DIR: &str = ".well-known/";

/// Extensions removed by the file-type rule.
pub const STRIPPED_EXTENSIONS: &[&str] = &[".php", ".txt", ".htm", ".html", ".pdf"];
/// Trailing directories removed by the directory rule.
pub const STRIPPED_DIRECTORIES: &[&str] = &["pages", "us", "en", "static"];
/// Path truncation depths, tried in this order.
pub const TRUNCATION_DEPTHS: [usize; 3] = [3, 2, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Derivation {
    WellKnownDirect,
    SuffixStripped,
    SegmentTruncated,
    DirectorySuffixRemoved,
    FileTypeRemoved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateUrl {
    pub url: Url,
    pub derivation: Derivation,
    pub generation_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CandidateError {
    #[error("seed {0:?} is not an absolute http(s) URL")]
    InvalidSeed(String),
}

fn is_file_like(segment: &str) -> bool {
    segment.rfind('.').is_some_and(|i| i > 0 && i + 1 < segment.len())
}

fn strip_known_extension(segment: &str) -> Option<&str> {
    let lower = segment.to_ascii_lowercase();
    STRIPPED_EXTENSIONS
        .iter()
        .find(|ext| lower.ends_with(*ext) && lower.len() > ext.len())
        .map(|ext| &segment[..segment.len() - ext.len()])
}

/// Base directories (as segment lists) in generation order.
fn base_paths(segments: &[&str]) -> Vec<(Vec<String>, Derivation)> {
    let owned = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let mut bases = vec![(Vec::new(), Derivation::WellKnownDirect)];

    for k in TRUNCATION_DEPTHS {
        if k <= segments.len() && !is_file_like(segments[k - 1]) {
            bases.push((owned(&segments[..k]), Derivation::SegmentTruncated));
        }
    }
    if let Some((last, dir)) = segments.split_last() {
        if is_file_like(last) {
            bases.push((owned(dir), Derivation::SuffixStripped));
        }
        if let Some(stem) = strip_known_extension(last) {
            let mut v = owned(dir);
            v.push(stem.to_string());
            bases.push((v, Derivation::FileTypeRemoved));
        }
    }
    let mut stripped = Vec::new();
    for (base, _) in &bases {
        let mut cur = base.clone();
        while cur
            .last()
            .is_some_and(|s| STRIPPED_DIRECTORIES.contains(&s.to_ascii_lowercase().as_str()))
        {
            cur.pop();
            stripped.push((cur.clone(), Derivation::DirectorySuffixRemoved));
        }
    }
    bases.extend(stripped);
    bases
}

/// Ordered, deduplicated candidate list for one seed URL.
pub fn generate_candidates(seed: &str) -> Result<Vec<CandidateUrl>, CandidateError> {
    let invalid = || CandidateError::InvalidSeed(seed.to_string());
    let mut url = Url::parse(seed.trim()).map_err(|_| invalid())?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none_or(str::is_empty) {
        return Err(invalid());
    }
    url.set_query(None);
    url.set_fragment(None);
    let origin = url.origin().ascii_serialization();
    let segments: Vec<&str> = url.path().split('/').filter(|s| !s.is_empty()).collect();

    let mut out: Vec<CandidateUrl> = Vec::new();
    for (base, derivation) in base_paths(&segments) {
        let dir = if base.is_empty() {
            "/".to_string()
        } else {
            format!("/{}/", base.join("/"))
        };
        for suffix in [WELL_KNOWN_MANIFEST, WELL_KNOWN_DIR] {
            let Ok(candidate) = Url::parse(&format!("{origin}{dir}{suffix}")) else {
                continue;
            };
            if out.iter().any(|c| c.url == candidate) {
                continue;
            }
            out.push(CandidateUrl {
                url: candidate,
                derivation,
                generation_rank: out.len() as u32,
            });
        }
    }
    Ok(out)
}
