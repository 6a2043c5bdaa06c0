//! Concept enrichment from a ConceptNet-style knowledge graph.
//!
//! Every concept label (and each of its tokens) is looked up in the store;
//! each incident edge, in either direction, becomes an annotation
//! `(relation, other endpoint)`. Enrichment is one hop only.

mod conceptnet;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ontology::{Annotation, Concept, Ontology};
use crate::par::{self, Execution};
use crate::text::{normalize_term, tokenize};

#[cfg(feature = "online")]
pub use conceptnet::UreqTransport;
pub use conceptnet::{parse_conceptnet_json, ConceptNetClient, FetchError, FetchSummary, Transport};

macro_rules! relations {
    ($($v:ident => $s:literal),* $(,)?) => {
        /// Closed relation vocabulary.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Relation { $($v),* }

        impl Relation {
            pub const ALL: &'static [Relation] = &[$(Relation::$v),*];

            /// lowerCamel name used in edge files and annotations.
            pub fn name(self) -> &'static str {
                match self { $(Relation::$v => $s),* }
            }
        }
    };
}

relations! {
    RelatedTo => "relatedTo",
    FormOf => "formOf",
    IsA => "isA",
    PartOf => "partOf",
    HasA => "hasA",
    UsedFor => "usedFor",
    CapableOf => "capableOf",
    AtLocation => "atLocation",
    Causes => "causes",
    HasSubevent => "hasSubevent",
    HasFirstSubevent => "hasFirstSubevent",
    HasLastSubevent => "hasLastSubevent",
    HasPrerequisite => "hasPrerequisite",
    HasProperty => "hasProperty",
    MotivatedByGoal => "motivatedByGoal",
    ObstructedBy => "obstructedBy",
    Desires => "desires",
    CreatedBy => "createdBy",
    Synonym => "synonym",
    Antonym => "antonym",
    DistinctFrom => "distinctFrom",
    DerivedFrom => "derivedFrom",
    SymbolOf => "symbolOf",
    DefinedAs => "definedAs",
    MannerOf => "mannerOf",
    LocatedNear => "locatedNear",
    HasContext => "hasContext",
    SimilarTo => "similarTo",
    CausesDesire => "causesDesire",
    MadeOf => "madeOf",
    ReceivesAction => "receivesAction",
    InstanceOf => "instanceOf",
    Entails => "entails",
    NotDesires => "notDesires",
    NotUsedFor => "notUsedFor",
    NotCapableOf => "notCapableOf",
}

impl Relation {
    /// Accepts `isA`, `IsA`, `/r/IsA`, case-insensitively.
    pub fn parse(s: &str) -> Option<Relation> {
        let s = s.strip_prefix("/r/").unwrap_or(s);
        Relation::ALL.iter().copied().find(|r| r.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEdge {
    pub relation: Relation,
    pub start: String,
    pub end: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnrichmentError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
}

/// Rows skipped while loading an edge file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub loaded: usize,
    pub unknown_relations: usize,
    pub skipped: Vec<(usize, String)>,
}

/// Edges indexed by both endpoint terms.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    edges: Vec<KnowledgeEdge>,
    by_term: HashMap<String, Vec<usize>>,
}

impl KnowledgeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[KnowledgeEdge] {
        &self.edges
    }

    /// Inserts an edge, normalizing both terms. Exact duplicates are ignored.
    pub fn insert(&mut self, mut edge: KnowledgeEdge) -> Result<bool, EnrichmentError> {
        edge.start = normalize_term(&edge.start);
        edge.end = normalize_term(&edge.end);
        if edge.start.is_empty() || edge.end.is_empty() {
            return Err(EnrichmentError::InvalidEdge("empty term".into()));
        }
        if !(edge.weight >= 0.0 && edge.weight.is_finite()) {
            return Err(EnrichmentError::InvalidEdge(format!("weight {} is not a non-negative number", edge.weight)));
        }
        if self.incident(&edge.start).any(|e| e.relation == edge.relation && e.start == edge.start && e.end == edge.end)
        {
            return Ok(false);
        }
        let idx = self.edges.len();
        self.by_term.entry(edge.start.clone()).or_default().push(idx);
        if edge.end != edge.start {
            self.by_term.entry(edge.end.clone()).or_default().push(idx);
        }
        self.edges.push(edge);
        Ok(true)
    }

    /// All edges whose start or end is `term`, in insertion order.
    pub fn incident<'a>(&'a self, term: &str) -> impl Iterator<Item = &'a KnowledgeEdge> + 'a {
        self.by_term.get(term).map(|v| v.as_slice()).unwrap_or_default().iter().map(move |&i| &self.edges[i])
    }

    /// Parses `relation<TAB>start<TAB>end<TAB>weight` rows; `#` starts a
    /// comment line. Bad rows are skipped and reported.
    pub fn from_tsv(text: &str) -> (KnowledgeStore, LoadReport) {
        let mut store = KnowledgeStore::new();
        let mut report = LoadReport::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 4 {
                report.skipped.push((line_no, format!("expected 4 tab-separated fields, got {}", fields.len())));
                continue;
            }
            let Some(relation) = Relation::parse(fields[0]) else {
                report.unknown_relations += 1;
                report.skipped.push((line_no, format!("unknown relation `{}`", fields[0])));
                continue;
            };
            let weight = match fields[3].parse::<f64>() {
                Ok(w) => w,
                Err(_) => {
                    report.skipped.push((line_no, format!("bad weight `{}`", fields[3])));
                    continue;
                }
            };
            let edge = KnowledgeEdge { relation, start: fields[1].into(), end: fields[2].into(), weight };
            match store.insert(edge) {
                Ok(_) => report.loaded += 1,
                Err(e) => report.skipped.push((line_no, e.to_string())),
            }
        }
        for (line, why) in &report.skipped {
            log::warn!("edge file line {line}: {why}; skipped");
        }
        (store, report)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# relation\tstart\tend\tweight\n");
        for e in &self.edges {
            s.push_str(&edge_row(e));
        }
        s
    }
}

pub(crate) fn edge_row(e: &KnowledgeEdge) -> String {
    format!("{}\t{}\t{}\t{}\n", e.relation.name(), e.start, e.end, e.weight)
}

pub fn load_edges(path: impl AsRef<Path>) -> Result<(KnowledgeStore, LoadReport), EnrichmentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| EnrichmentError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    Ok(KnowledgeStore::from_tsv(&text))
}

/// Terms looked up for a concept: each full label in term form plus its tokens.
pub fn lookup_terms(concept: &Concept) -> Vec<String> {
    let mut terms: Vec<String> = Vec::new();
    for label in concept.effective_labels() {
        let full = normalize_term(label);
        for t in std::iter::once(full).chain(tokenize(label)) {
            if !t.is_empty() && !terms.contains(&t) {
                terms.push(t);
            }
        }
    }
    terms
}

/// Appends one annotation per incident edge of the concept's lookup terms.
/// Existing labels and annotations are kept; duplicates are collapsed.
pub fn annotate_concept(concept: &Concept, store: &KnowledgeStore) -> Concept {
    let mut out = concept.clone();
    for term in lookup_terms(concept) {
        for e in store.incident(&term) {
            if e.start == e.end {
                continue;
            }
            let other = if e.start == term { &e.end } else { &e.start };
            let ann = Annotation::new(e.relation.name(), other.clone());
            if !out.annotations.contains(&ann) {
                out.annotations.push(ann);
            }
        }
    }
    out
}

pub fn annotate_ontology(o: &Ontology, store: &KnowledgeStore) -> Ontology {
    annotate_ontology_with(o, store, Execution::default())
}

pub fn annotate_ontology_with(o: &Ontology, store: &KnowledgeStore, exec: Execution) -> Ontology {
    let concepts: Vec<&Concept> = o.concepts.values().collect();
    let annotated = par::map(exec, &concepts, |c| annotate_concept(c, store));
    let mut out = o.clone();
    for c in annotated {
        out.concepts.insert(c.id.clone(), c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ATTRACTION_EDGES: &str = "antonym\tattraction\trepulsion\t1.0\n\
                        atLocation\tattraction\tdisneyland\t1.0\n\
                        causesDesire\tattraction\tflirt\t0.5\n";

    #[test]
    fn tsv_rows_are_indexed_by_both_terms() {
        let (s, r) = KnowledgeStore::from_tsv(ATTRACTION_EDGES);
        assert_eq!(r.loaded, 3);
        assert_eq!(s.incident("attraction").count(), 3);
        let e = s.incident("repulsion").next().unwrap();
        assert_eq!(e.relation, Relation::Antonym);
        assert_eq!(s.incident("disneyland").next().unwrap().relation, Relation::AtLocation);
    }

    #[test]
    fn empty_and_bad_rows() {
        let (s, r) = KnowledgeStore::from_tsv("");
        assert!(s.is_empty());
        assert_eq!(r, LoadReport::default());
        let (s, r) = KnowledgeStore::from_tsv("# c\nlikes\ta\tb\t1\nisA\ta\tb\nisA\ta\tb\t-1\nisA\tA B\tc\t2\n");
        assert_eq!(s.len(), 1);
        assert_eq!(s.edges()[0].start, "a_b");
        assert_eq!(r.unknown_relations, 1);
        assert_eq!(r.skipped.iter().map(|(l, _)| *l).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn relation_names_parse() {
        assert_eq!(Relation::parse("/r/IsA"), Some(Relation::IsA));
        assert_eq!(Relation::parse("causesdesire"), Some(Relation::CausesDesire));
        assert_eq!(Relation::parse("label"), None);
    }

    #[test]
    fn attraction_annotations() {
        let (s, _) = KnowledgeStore::from_tsv(ATTRACTION_EDGES);
        let c = annotate_concept(&Concept::new("attraction", Some("object")), &s);
        assert_eq!(
            c.annotations,
            vec![
                Annotation::new("antonym", "repulsion"),
                Annotation::new("atLocation", "disneyland"),
                Annotation::new("causesDesire", "flirt"),
            ]
        );
        let untouched = Concept::new("castle", Some("object"));
        assert_eq!(annotate_concept(&untouched, &s), untouched);
    }

    #[test]
    fn shared_neighbours_give_shared_annotations() {
        let (s, _) = KnowledgeStore::from_tsv(
            "relatedTo\tattraction\tsightseeing\t1\nrelatedTo\tmust_see\tsightseeing\t1\nisA\tmust_see\tplace\t1\n",
        );
        let a = annotate_concept(&Concept::new("attraction", None), &s);
        let b = annotate_concept(&Concept::new("must_see", None), &s);
        assert!(a.annotations.iter().any(|x| b.annotations.contains(x)));
    }

    #[test]
    fn ontology_enrichment_is_idempotent_and_keeps_structure() {
        let (s, _) = KnowledgeStore::from_tsv(&format!("{ATTRACTION_EDGES}isA\tobject\tthing\t1\n"));
        let mut o = Ontology::new("A", "object");
        o.add_concept(Concept::new("attraction", Some("object"))).unwrap();
        o.add_individual("Lonja", "attraction").unwrap();
        let once = annotate_ontology(&o, &s);
        let twice = annotate_ontology(&once, &s);
        assert_eq!(once, twice);
        assert_eq!(once.concept("object").unwrap().annotations, vec![Annotation::new("isA", "thing")]);
        assert_eq!(once.individuals, o.individuals);
        assert_eq!(once.parent("attraction"), Some("object"));
    }
}
