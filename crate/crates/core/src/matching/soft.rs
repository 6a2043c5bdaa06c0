//! SoftTFIDF over class documents.

use std::collections::{BTreeMap, BTreeSet};

use crate::ontology::Concept;
use crate::text::tokenize;

/// Tokens of the concept id, its labels and its annotation values.
pub fn class_document(c: &Concept) -> Vec<String> {
    let mut doc = tokenize(&c.id);
    for l in &c.labels {
        doc.extend(tokenize(l));
    }
    for a in &c.annotations {
        doc.extend(tokenize(&a.val));
    }
    doc
}

/// Document frequencies over a collection of class documents.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: usize,
    df: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new<'a, I: IntoIterator<Item = &'a Vec<String>>>(docs: I) -> Corpus {
        let mut c = Corpus::default();
        for d in docs {
            c.docs += 1;
            for t in d.iter().collect::<BTreeSet<_>>() {
                *c.df.entry(t.clone()).or_default() += 1;
            }
        }
        c
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0).max(1);
        ((self.docs as f64 + 1.0) / df as f64).ln()
    }

    /// L2-normalized `log(tf + 1) * idf` weights.
    pub fn weights(&self, doc: &[String]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in doc {
            *tf.entry(t.clone()).or_default() += 1.0;
        }
        let mut w: BTreeMap<String, f64> = tf
            .into_iter()
            .map(|(t, n)| {
                let v = (n + 1.0).ln() * self.idf(&t);
                (t, v)
            })
            .collect();
        let norm = w.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in w.values_mut() {
                *v /= norm;
            }
        }
        w
    }
}

/// Directed SoftTFIDF from `s` to `t`, clamped to `[0, 1]`.
pub fn soft_tfidf(s: &[String], t: &[String], corpus: &Corpus, theta: f64) -> f64 {
    let ws = corpus.weights(s);
    let wt = corpus.weights(t);
    let mut total = 0.0;
    for (w, vw) in &ws {
        let mut best: Option<(&String, f64)> = None;
        for v in wt.keys() {
            let sim = strsim::jaro_winkler(w, v);
            if sim >= theta && best.is_none_or(|(_, b)| sim > b) {
                best = Some((v, sim));
            }
        }
        if let Some((v, sim)) = best {
            total += vw * wt[v] * sim;
        }
    }
    total.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn identical_documents_score_one() {
        let a = doc("museum art exhibition gallery");
        let c = Corpus::new([&a, &doc("hotel room"), &doc("bar drink")]);
        assert!((soft_tfidf(&a, &a, &c, 0.9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_documents_score_zero() {
        let a = doc("parcel courier");
        let b = doc("museum gallery");
        let c = Corpus::new([&a, &b]);
        assert_eq!(soft_tfidf(&a, &b, &c, 0.9), 0.0);
    }

    #[test]
    fn near_spelling_is_close() {
        let a = doc("attraction");
        let b = doc("attractions");
        let jw = strsim::jaro_winkler("attraction", "attractions");
        assert!((jw - 0.9818).abs() < 1e-3);
        let c = Corpus::new([&a, &b]);
        let s = soft_tfidf(&a, &b, &c, 0.9);
        assert!(s > 0.9 && (s - jw).abs() < 1e-9);
    }

    #[test]
    fn empty_documents() {
        let c = Corpus::default();
        assert_eq!(soft_tfidf(&[], &doc("x y"), &c, 0.9), 0.0);
        assert_eq!(soft_tfidf(&doc("ab"), &[], &c, 0.9), 0.0);
    }
}
