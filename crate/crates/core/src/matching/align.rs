//! Class alignment restricted to the neighbourhood of one concept.

use std::collections::BTreeSet;

use serde::Serialize;

use super::soft::{class_document, soft_tfidf, Corpus};
use super::MatchConfig;
use crate::ontology::{Concept, Ontology, OntologyError};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correspondence {
    pub source: String,
    pub target: String,
    pub score: f64,
}

/// Best target a fragment concept did not get, and why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub source: String,
    pub target: Option<String>,
    pub score: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Alignment {
    pub correspondences: Vec<Correspondence>,
    pub rejected: Vec<Candidate>,
}

impl Alignment {
    pub fn target_of(&self, source: &str) -> Option<&Correspondence> {
        self.correspondences.iter().find(|c| c.source == source)
    }
}

/// Scores every fragment concept against every non-root concept of `n_phi`
/// and keeps a one-to-one assignment, taking pairs in descending score.
pub fn align_classes(n_phi: &Ontology, fragment: &[&Concept], cfg: &MatchConfig) -> Alignment {
    align_classes_with(n_phi, fragment, &[], cfg, Execution::default())
}

/// `extra_docs` widens the IDF corpus beyond the fragment and `n_phi`.
pub fn align_classes_with(
    n_phi: &Ontology,
    fragment: &[&Concept],
    extra_docs: &[Vec<String>],
    cfg: &MatchConfig,
    exec: Execution,
) -> Alignment {
    let targets: Vec<(&str, Vec<String>)> =
        n_phi.concepts.values().filter(|c| c.id != n_phi.root).map(|c| (c.id.as_str(), class_document(c))).collect();
    let sources: Vec<(&str, Vec<String>)> = fragment.iter().map(|c| (c.id.as_str(), class_document(c))).collect();
    let corpus = Corpus::new(targets.iter().map(|(_, d)| d).chain(sources.iter().map(|(_, d)| d)).chain(extra_docs));

    let rows: Vec<Vec<f64>> = par::map(exec, &sources, |(_, sd)| {
        targets.iter().map(|(_, td)| soft_tfidf(sd, td, &corpus, cfg.inner_theta)).collect()
    });

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            if s >= cfg.class_threshold {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| sources[a.1].0.cmp(sources[b.1].0))
            .then_with(|| targets[a.2].0.cmp(targets[b.2].0))
    });

    let mut used_s = BTreeSet::new();
    let mut used_t = BTreeSet::new();
    let mut out = Alignment::default();
    for (score, i, j) in pairs {
        if used_s.contains(&i) || used_t.contains(&j) {
            continue;
        }
        used_s.insert(i);
        used_t.insert(j);
        out.correspondences.push(Correspondence { source: sources[i].0.into(), target: targets[j].0.into(), score });
    }

    for (i, (sid, _)) in sources.iter().enumerate() {
        if used_s.contains(&i) {
            continue;
        }
        let best = rows[i]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| targets[b.0].0.cmp(targets[a.0].0)));
        let cand = match best {
            None => {
                Candidate { source: sid.to_string(), target: None, score: 0.0, reason: "no target concepts".into() }
            }
            Some((j, &s)) => Candidate {
                source: sid.to_string(),
                target: Some(targets[j].0.into()),
                score: s,
                reason: if s >= cfg.class_threshold {
                    "target already taken by a higher-scoring pair".into()
                } else {
                    format!("below class threshold {}", cfg.class_threshold)
                },
            },
        };
        out.rejected.push(cand);
    }
    out
}

/// `c_t`, its parent unless that is the root, and its siblings, in that order.
pub fn fragment<'a>(n_o: &'a Ontology, c_t: &'a str) -> Result<Vec<&'a Concept>, OntologyError> {
    let c = n_o.concept(c_t).ok_or_else(|| OntologyError::UnknownConcept(c_t.into()))?;
    let mut out = vec![c];
    if let Some(p) = n_o.parent(c_t).filter(|p| *p != n_o.root) {
        out.extend(n_o.concept(p));
    }
    out.extend(n_o.siblings(c_t));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "concept")]
pub enum PositionOutcome {
    EquivalentTo(String),
    NewChildOf(String),
    Unplaced(String),
}

/// Which positioning rule decided the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    Equivalent = 1,
    Parent = 2,
    Siblings = 3,
    None = 4,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positioning {
    pub concept: String,
    pub outcome: PositionOutcome,
    pub rule: Rule,
    pub rule_number: u8,
    pub alignment: Alignment,
}

pub fn position_type(
    n_phi: &Ontology,
    n_o: &Ontology,
    c_t: &str,
    cfg: &MatchConfig,
) -> Result<Positioning, OntologyError> {
    position_type_with(n_phi, n_o, c_t, cfg, Execution::default())
}

pub fn position_type_with(
    n_phi: &Ontology,
    n_o: &Ontology,
    c_t: &str,
    cfg: &MatchConfig,
    exec: Execution,
) -> Result<Positioning, OntologyError> {
    let frag = fragment(n_o, c_t)?;
    let extra: Vec<Vec<String>> =
        n_o.concepts.values().filter(|c| !frag.iter().any(|f| f.id == c.id)).map(class_document).collect();
    let alignment = align_classes_with(n_phi, &frag, &extra, cfg, exec);
    let done = |outcome, rule: Rule, alignment| {
        Ok(Positioning { concept: c_t.into(), outcome, rule, rule_number: rule as u8, alignment })
    };

    if let Some(m) = alignment.target_of(c_t) {
        return done(PositionOutcome::EquivalentTo(m.target.clone()), Rule::Equivalent, alignment);
    }
    let parent = n_o.parent(c_t).filter(|p| *p != n_o.root);
    if let Some(m) = parent.and_then(|p| alignment.target_of(p)) {
        return done(PositionOutcome::NewChildOf(m.target.clone()), Rule::Parent, alignment);
    }

    let siblings = n_o.siblings(c_t);
    let matched: Vec<&Correspondence> = siblings.iter().filter_map(|s| alignment.target_of(&s.id)).collect();
    let why = if siblings.is_empty() {
        "no parent match and no siblings".to_string()
    } else {
        let fraction = matched.len() as f64 / siblings.len() as f64;
        let parents: BTreeSet<Option<&str>> = matched.iter().map(|m| n_phi.parent(&m.target)).collect();
        if fraction < cfg.sibling_threshold {
            format!(
                "no parent match; {}/{} siblings matched, below {}",
                matched.len(),
                siblings.len(),
                cfg.sibling_threshold
            )
        } else if parents.len() != 1 {
            format!("no parent match; matched siblings disagree on parent ({} candidates)", parents.len())
        } else {
            match parents.into_iter().next().flatten() {
                Some(p) => return done(PositionOutcome::NewChildOf(p.to_string()), Rule::Siblings, alignment),
                None => "matched siblings have no parent in the task ontology".to_string(),
            }
        }
    };
    done(PositionOutcome::Unplaced(why), Rule::None, alignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Annotation;

    fn concept(id: &str, parent: &str, anns: &[(&str, &str)]) -> Concept {
        let mut c = Concept::new(id, Some(parent));
        c.annotations = anns.iter().map(|(r, v)| Annotation::new(*r, *v)).collect();
        c
    }

    const TOUR: &[&str] = &[
        "sightseeing",
        "tourist",
        "visit",
        "landmark",
        "travel",
        "holiday",
        "guide",
        "ticket",
        "photo",
        "monument",
        "excursion",
        "culture",
        "history",
        "destination",
        "crowd",
        "souvenir",
        "trip",
        "leisure",
        "popular",
        "famous",
    ];
    const ART: &[&str] = &[
        "art",
        "painting",
        "gallery",
        "sculpture",
        "artist",
        "canvas",
        "curator",
        "display",
        "exhibit",
        "collection",
        "portrait",
        "museum",
        "artwork",
        "visual",
        "modern",
        "installation",
        "vernissage",
        "critic",
        "drawing",
        "show",
    ];

    fn related(terms: &[&str]) -> Vec<(&'static str, String)> {
        terms.iter().map(|t| ("relatedTo", t.to_string())).collect()
    }

    fn with(id: &str, parent: &str, anns: Vec<(&str, String)>) -> Concept {
        let mut c = Concept::new(id, Some(parent));
        c.annotations = anns.into_iter().map(|(r, v)| Annotation::new(r, v)).collect();
        c
    }

    fn synthetic(stem: &str) -> Vec<(&'static str, String)> {
        (0..20).map(|i| ("hasA", format!("{stem}x{i:02}"))).collect()
    }

    fn n_phi() -> Ontology {
        let mut o = Ontology::new("A", "object");
        o.add_concept(with("attraction", "object", related(TOUR))).unwrap();
        o.add_concept(with("exhibition", "attraction", related(ART))).unwrap();
        o.add_concept(with("aquarium", "attraction", synthetic("aqua"))).unwrap();
        o.add_concept(with("garden", "attraction", synthetic("flora"))).unwrap();
        o.add_concept(with("restaurant", "object", synthetic("dine"))).unwrap();
        o
    }

    #[test]
    fn lexical_copy_matches_with_score_one() {
        let n = n_phi();
        let a = n.concept("aquarium").unwrap().clone();
        let al = align_classes(&n, &[&a], &MatchConfig::default());
        assert_eq!(al.correspondences.len(), 1);
        assert_eq!(al.correspondences[0].target, "aquarium");
        assert!((al.correspondences[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parent_rule_places_child() {
        let n = n_phi();
        let mut o = Ontology::new("E", "thing");
        o.add_concept(with("must_see", "thing", related(TOUR))).unwrap();
        o.add_concept(concept("plaza", "must_see", &[("isA", "square"), ("hasA", "fountain")])).unwrap();
        let p = position_type(&n, &o, "plaza", &MatchConfig::default()).unwrap();
        assert_eq!(p.outcome, PositionOutcome::NewChildOf("attraction".into()));
        assert_eq!(p.rule_number, 2);
        assert_eq!(p.alignment.target_of("must_see").unwrap().target, "attraction");
    }

    #[test]
    fn equivalent_by_annotations() {
        let n = n_phi();
        let mut o = Ontology::new("X", "thing");
        o.add_concept(with("artexhibit", "thing", related(ART))).unwrap();
        let p = position_type(&n, &o, "artexhibit", &MatchConfig::default()).unwrap();
        assert_eq!(p.outcome, PositionOutcome::EquivalentTo("exhibition".into()));
        assert_eq!(p.rule, Rule::Equivalent);
    }

    #[test]
    fn sibling_rule_requires_common_parent() {
        let n = n_phi();
        let mut o = Ontology::new("S", "thing");
        o.add_concept(concept("venue", "thing", &[("isA", "building")])).unwrap();
        o.add_concept(with("oceanarium", "venue", synthetic("aqua"))).unwrap();
        o.add_concept(with("park", "venue", synthetic("flora"))).unwrap();
        o.add_concept(concept("zoo", "venue", &[("hasA", "lions")])).unwrap();
        let p = position_type(&n, &o, "zoo", &MatchConfig::default()).unwrap();
        assert_eq!(p.outcome, PositionOutcome::NewChildOf("attraction".into()));
        assert_eq!(p.rule, Rule::Siblings);

        let mut o2 = o.clone();
        o2.concepts.get_mut("park").unwrap().annotations =
            synthetic("dine").into_iter().map(|(r, v)| Annotation::new(r, v)).collect();
        let p = position_type(&n, &o2, "zoo", &MatchConfig::default()).unwrap();
        assert!(matches!(p.outcome, PositionOutcome::Unplaced(_)), "{p:?}");
    }

    #[test]
    fn isolated_concept_is_unplaced() {
        let n = n_phi();
        let mut o = Ontology::new("D", "thing");
        o.add_concept(concept("tram_stop", "thing", &[("usedFor", "transport")])).unwrap();
        let p = position_type(&n, &o, "tram_stop", &MatchConfig::default()).unwrap();
        assert!(matches!(p.outcome, PositionOutcome::Unplaced(_)));
        assert_eq!(p.rule_number, 4);
        assert!(position_type(&n, &o, "nope", &MatchConfig::default()).is_err());
    }
}
