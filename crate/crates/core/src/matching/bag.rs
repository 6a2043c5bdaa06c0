use std::collections::BTreeMap;

use serde::Serialize;

use crate::ontology::{Ontology, OntologyRepository, LABEL_REL};
use crate::par::{self, Execution};
use crate::text::tokenize;

/// Term-frequency vector: each term's share of all term occurrences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermBag(pub BTreeMap<String, f64>);

impl TermBag {
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> TermBag {
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        let mut total = 0.0;
        for t in tokens {
            *counts.entry(t).or_default() += 1.0;
            total += 1.0;
        }
        for w in counts.values_mut() {
            *w /= total;
        }
        TermBag(counts)
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

/// Tokens of every concept id, label, annotation relation and annotation value.
pub fn term_bag(o: &Ontology) -> TermBag {
    let mut tokens = Vec::new();
    for c in o.concepts.values() {
        tokens.extend(tokenize(&c.id));
        for l in &c.labels {
            tokens.extend(tokenize(l));
        }
        for a in &c.annotations {
            if a.rel != LABEL_REL {
                tokens.extend(tokenize(&a.rel));
            }
            tokens.extend(tokenize(&a.val));
        }
    }
    TermBag::from_tokens(tokens)
}

pub fn cosine_similarity(a: &TermBag, b: &TermBag) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.0.iter().map(|(t, w)| w * large.get(t)).sum();
    let na: f64 = a.0.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb: f64 = b.0.values().map(|w| w * w).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityRow {
    pub id: String,
    pub score: f64,
    pub selected: bool,
}

/// Every repository member scored against `n_phi`, best first, ties by id.
pub fn rank_similar(
    n_phi: &Ontology,
    repo: &OntologyRepository,
    threshold: f64,
    exec: Execution,
) -> Vec<SimilarityRow> {
    let base = term_bag(n_phi);
    let scores = par::map(exec, &repo.ontologies, |o| cosine_similarity(&base, &term_bag(o)));
    let mut rows: Vec<SimilarityRow> = repo
        .ontologies
        .iter()
        .zip(scores)
        .map(|(o, score)| SimilarityRow { id: o.id.clone(), score, selected: score >= threshold })
        .collect();
    rows.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    rows
}

/// The members scoring at least `threshold`, in ranking order.
pub fn filter_similar(n_phi: &Ontology, repo: &OntologyRepository, threshold: f64) -> OntologyRepository {
    let ontologies = rank_similar(n_phi, repo, threshold, Execution::default())
        .into_iter()
        .filter(|r| r.selected)
        .filter_map(|r| repo.get(&r.id).cloned())
        .collect();
    OntologyRepository { ontologies }
}
