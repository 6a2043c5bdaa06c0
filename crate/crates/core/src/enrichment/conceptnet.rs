//! Optional remote lookups against a ConceptNet-compatible REST endpoint.
//! Fetched edges are appended to a local TSV cache so later runs are offline.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::Deserialize;

use super::{edge_row, KnowledgeEdge, KnowledgeStore, Relation};
use crate::text::normalize_term;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FetchError {
    #[error("request to {url} failed: {msg}")]
    Transport { url: String, msg: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("cache {path}: {msg}")]
    Cache { path: String, msg: String },
}

/// Fetches a URL body. Implemented over HTTP with the `online` feature;
/// tests supply canned responses.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String, FetchError>;
}

#[cfg(feature = "online")]
pub struct UreqTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "online")]
impl UreqTransport {
    pub fn new(timeout: std::time::Duration) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(timeout)).build();
        UreqTransport { agent: config.into() }
    }
}

#[cfg(feature = "online")]
impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<String, FetchError> {
        let err = |e: ureq::Error| FetchError::Transport { url: url.into(), msg: e.to_string() };
        self.agent.get(url).call().map_err(err)?.body_mut().read_to_string().map_err(err)
    }
}

#[derive(Deserialize)]
struct RawPage {
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
struct RawEdge {
    rel: RawNode,
    start: RawNode,
    end: RawNode,
    #[serde(default = "one")]
    weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct RawNode {
    #[serde(default)]
    label: String,
    #[serde(default)]
    language: Option<String>,
}

/// Extracts English edges with a known relation from a response page.
pub fn parse_conceptnet_json(body: &str) -> Result<Vec<KnowledgeEdge>, FetchError> {
    let page: RawPage = serde_json::from_str(body).map_err(|e| FetchError::Malformed(e.to_string()))?;
    let english = |n: &RawNode| n.language.as_deref().is_none_or(|l| l == "en");
    Ok(page
        .edges
        .into_iter()
        .filter(|e| english(&e.start) && english(&e.end))
        .filter_map(|e| {
            Some(KnowledgeEdge {
                relation: Relation::parse(&e.rel.label)?,
                start: normalize_term(&e.start.label),
                end: normalize_term(&e.end.label),
                weight: e.weight,
            })
        })
        .filter(|e| !e.start.is_empty() && !e.end.is_empty())
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchSummary {
    pub fetched_terms: usize,
    pub new_edges: usize,
    pub failures: Vec<(String, String)>,
}

pub struct ConceptNetClient {
    pub base_url: String,
    pub limit: usize,
    pub retries: usize,
    pub cache: Option<PathBuf>,
    transport: Box<dyn Transport>,
    cache_lock: Mutex<()>,
}

impl ConceptNetClient {
    pub fn new(base_url: impl Into<String>, transport: Box<dyn Transport>) -> Self {
        ConceptNetClient {
            base_url: base_url.into(),
            limit: 50,
            retries: 2,
            cache: None,
            transport,
            cache_lock: Mutex::new(()),
        }
    }

    pub fn with_cache(mut self, path: impl Into<PathBuf>) -> Self {
        self.cache = Some(path.into());
        self
    }

    pub fn url_for(&self, term: &str) -> String {
        format!("{}/c/en/{}?limit={}", self.base_url.trim_end_matches('/'), normalize_term(term), self.limit)
    }

    pub fn fetch_term(&self, term: &str) -> Result<Vec<KnowledgeEdge>, FetchError> {
        let url = self.url_for(term);
        let mut last = None;
        for attempt in 0..=self.retries {
            match self.transport.get(&url) {
                Ok(body) => return parse_conceptnet_json(&body),
                Err(e) => {
                    log::debug!("fetch {url} attempt {} failed: {e}", attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(last.unwrap_or_else(|| FetchError::Transport { url, msg: "no attempt made".into() }))
    }

    fn append_cache(&self, edges: &[KnowledgeEdge]) -> Result<(), FetchError> {
        let Some(path) = &self.cache else {
            return Ok(());
        };
        let _guard = self.cache_lock.lock().unwrap_or_else(|p| p.into_inner());
        let err = |e: std::io::Error| FetchError::Cache { path: path.display().to_string(), msg: e.to_string() };
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        for e in edges {
            f.write_all(edge_row(e).as_bytes()).map_err(err)?;
        }
        Ok(())
    }

    /// Fetches every term that has no local edges yet and adds the results
    /// to `store`. Failures are collected, not fatal.
    pub fn augment(&self, store: &mut KnowledgeStore, terms: &[String]) -> FetchSummary {
        let mut summary = FetchSummary::default();
        for term in terms {
            let term = normalize_term(term);
            if term.is_empty() || store.incident(&term).next().is_some() {
                continue;
            }
            match self.fetch_term(&term) {
                Ok(edges) => {
                    summary.fetched_terms += 1;
                    let mut added = Vec::new();
                    for e in edges {
                        if let Ok(true) = store.insert(e.clone()) {
                            added.push(e);
                        }
                    }
                    summary.new_edges += added.len();
                    if let Err(e) = self.append_cache(&added) {
                        summary.failures.push((term.clone(), e.to_string()));
                    }
                }
                Err(e) => {
                    log::warn!("no remote edges for `{term}`: {e}");
                    summary.failures.push((term, e.to_string()));
                }
            }
        }
        summary
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Canned(HashMap<String, Result<String, FetchError>>);

    impl Transport for Canned {
        fn get(&self, url: &str) -> Result<String, FetchError> {
            self.0
                .get(url)
                .cloned()
                .unwrap_or_else(|| Err(FetchError::Transport { url: url.into(), msg: "404".into() }))
        }
    }

    const PAGE: &str = r#"{"edges":[
        {"rel":{"label":"IsA"},"start":{"label":"jazz bar","language":"en"},"end":{"label":"bar","language":"en"},"weight":2.0},
        {"rel":{"label":"Synonym"},"start":{"label":"jazz bar","language":"en"},"end":{"label":"bar de jazz","language":"es"},"weight":1.0},
        {"rel":{"label":"ExternalURL"},"start":{"label":"jazz bar"},"end":{"label":"x"}}
    ]}"#;

    #[test]
    fn parse_keeps_english_known_relations() {
        let edges = parse_conceptnet_json(PAGE).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].start, "jazz_bar");
        assert_eq!(edges[0].relation, Relation::IsA);
        assert!(parse_conceptnet_json("nope").is_err());
    }

    #[test]
    fn augment_caches_and_tolerates_failures() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache.tsv");
        let client = ConceptNetClient::new(
            "http://kb.local/",
            Box::new(Canned(HashMap::from([(
                "http://kb.local/c/en/jazz_bar?limit=50".to_string(),
                Ok(PAGE.to_string()),
            )]))),
        )
        .with_cache(&cache);
        let mut store = KnowledgeStore::new();
        let s = client.augment(&mut store, &["Jazz bar".into(), "plaza".into()]);
        assert_eq!(s.fetched_terms, 1);
        assert_eq!(s.new_edges, 1);
        assert_eq!(s.failures.len(), 1);
        let (reloaded, report) = KnowledgeStore::from_tsv(&std::fs::read_to_string(&cache).unwrap());
        assert!(report.skipped.is_empty());
        assert_eq!(reloaded.edges(), store.edges());
        let again = client.augment(&mut store, &["jazz_bar".into()]);
        assert_eq!(again.fetched_terms, 0);
    }
}
