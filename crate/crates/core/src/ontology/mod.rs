//! Taxonomy model shared by the task ontology and repository ontologies.

mod io;
mod measures;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::task::{PlanningTask, ROOT_TYPE};

pub use io::{load, load_dir, save, OntologyRepository};
pub use measures::{semantic_distance, semantic_variance, SvMode};

/// Reserved annotation relation for plain labels.
pub const LABEL_REL: &str = "label";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("duplicate concept `{0}`")]
    DuplicateConcept(String),
    #[error("duplicate individual `{0}`")]
    DuplicateIndividual(String),
    #[error("root `{0}` is not a concept")]
    MissingRoot(String),
    #[error("multiple roots: {}", .0.join(", "))]
    MultipleRoots(Vec<String>),
    #[error("root `{0}` must not have a parent")]
    RootWithParent(String),
    #[error("parent cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("concept `{concept}` has unknown parent `{parent}`")]
    UnknownParent { concept: String, parent: String },
    #[error("individual `{individual}` refers to unknown concept `{concept}`")]
    UnknownIndividualConcept { individual: String, concept: String },
    #[error("annotation relation `{rel}` on `{concept}` is not in the relation vocabulary")]
    BadRelation { concept: String, rel: String },
    #[error("duplicate ontology id `{0}`")]
    DuplicateOntology(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: schema violation: {msg}")]
    Schema { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub rel: String,
    pub val: String,
}

impl Annotation {
    pub fn new(rel: impl Into<String>, val: impl Into<String>) -> Self {
        Annotation { rel: rel.into(), val: val.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub parent: Option<String>,
    pub labels: Vec<String>,
    pub annotations: Vec<Annotation>,
}

impl Concept {
    pub fn new(id: impl Into<String>, parent: Option<&str>) -> Self {
        Concept { id: id.into(), parent: parent.map(str::to_string), labels: Vec::new(), annotations: Vec::new() }
    }

    /// Labels, or the id when the concept has none.
    pub fn effective_labels(&self) -> Vec<&str> {
        if self.labels.is_empty() {
            vec![self.id.as_str()]
        } else {
            self.labels.iter().map(String::as_str).collect()
        }
    }
}

/// Single-rooted, single-inheritance taxonomy with individuals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ontology {
    pub id: String,
    pub root: String,
    pub concepts: BTreeMap<String, Concept>,
    /// Individual id to concept id.
    pub individuals: BTreeMap<String, String>,
}

impl Ontology {
    pub fn new(id: impl Into<String>, root: impl Into<String>) -> Self {
        let root = root.into();
        let mut concepts = BTreeMap::new();
        concepts.insert(root.clone(), Concept::new(root.clone(), None));
        Ontology { id: id.into(), root, concepts, individuals: BTreeMap::new() }
    }

    /// One concept per type with identical parent edges, one individual per
    /// object under its type's concept, rooted at `object`.
    pub fn from_task(task: &PlanningTask) -> Ontology {
        let mut o = Ontology::new(task.domain.name.clone(), ROOT_TYPE);
        for (child, parent) in task.domain.types.entries() {
            o.concepts.insert(child.to_string(), Concept::new(child, Some(parent)));
        }
        for (obj, ty) in &task.instance.objects {
            o.individuals.insert(obj.clone(), ty.clone());
        }
        o
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.concepts.get(id).and_then(|c| c.parent.as_deref())
    }

    pub fn children<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Concept> + 'a {
        self.concepts.values().filter(move |c| c.parent.as_deref() == Some(id))
    }

    /// Other children of the concept's parent.
    pub fn siblings<'a>(&'a self, id: &'a str) -> Vec<&'a Concept> {
        match self.parent(id) {
            Some(p) => self.children(p).filter(|c| c.id != id).collect(),
            None => Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// The concept itself, all transitive parents, and the root.
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>, OntologyError> {
        let mut cur = self.concepts.get(id).ok_or_else(|| OntologyError::UnknownConcept(id.into()))?;
        let mut out = vec![cur.id.as_str()];
        while let Some(p) = cur.parent.as_deref() {
            cur = self.concepts.get(p).ok_or_else(|| OntologyError::UnknownConcept(p.into()))?;
            out.push(cur.id.as_str());
            if out.len() > self.concepts.len() {
                return Err(OntologyError::Cycle(out.iter().map(|s| s.to_string()).collect()));
            }
        }
        Ok(out)
    }

    /// Number of edges from the root.
    pub fn depth(&self, id: &str) -> Result<usize, OntologyError> {
        Ok(self.ancestors(id)?.len() - 1)
    }

    pub fn add_concept(&mut self, concept: Concept) -> Result<(), OntologyError> {
        if self.concepts.contains_key(&concept.id) {
            return Err(OntologyError::DuplicateConcept(concept.id));
        }
        match concept.parent.as_deref() {
            Some(p) if self.concepts.contains_key(p) => {}
            Some(p) => {
                return Err(OntologyError::UnknownParent { concept: concept.id.clone(), parent: p.into() });
            }
            None => return Err(OntologyError::MultipleRoots(vec![self.root.clone(), concept.id])),
        }
        self.concepts.insert(concept.id.clone(), concept);
        Ok(())
    }

    pub fn add_individual(&mut self, id: &str, concept: &str) -> Result<(), OntologyError> {
        if !self.concepts.contains_key(concept) {
            return Err(OntologyError::UnknownConcept(concept.into()));
        }
        if self.individuals.contains_key(id) {
            return Err(OntologyError::DuplicateIndividual(id.into()));
        }
        self.individuals.insert(id.into(), concept.into());
        Ok(())
    }

    /// Checks the tree invariants: one root, known parents, no cycles,
    /// individuals under existing concepts.
    pub fn validate(&self) -> Result<(), OntologyError> {
        let root = self.concepts.get(&self.root).ok_or_else(|| OntologyError::MissingRoot(self.root.clone()))?;
        if root.parent.is_some() {
            return Err(OntologyError::RootWithParent(self.root.clone()));
        }
        let roots: Vec<String> = self.concepts.values().filter(|c| c.parent.is_none()).map(|c| c.id.clone()).collect();
        if roots.len() > 1 {
            return Err(OntologyError::MultipleRoots(roots));
        }
        for c in self.concepts.values() {
            if let Some(p) = &c.parent {
                if !self.concepts.contains_key(p) {
                    return Err(OntologyError::UnknownParent { concept: c.id.clone(), parent: p.clone() });
                }
            }
        }
        for id in self.concepts.keys() {
            let mut path = vec![id.clone()];
            let mut cur = id.as_str();
            while let Some(p) = self.parent(cur) {
                if let Some(i) = path.iter().position(|x| x == p) {
                    let mut cycle = path[i..].to_vec();
                    cycle.push(p.to_string());
                    return Err(OntologyError::Cycle(cycle));
                }
                path.push(p.to_string());
                cur = p;
            }
        }
        for (ind, c) in &self.individuals {
            if !self.concepts.contains_key(c) {
                return Err(OntologyError::UnknownIndividualConcept { individual: ind.clone(), concept: c.clone() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::PlanningTask;

    const DOMAIN: &str =
        "(define (domain tourism) (:types person attraction - object aquarium architecture - attraction))";

    #[test]
    fn from_task_mirrors_types_and_objects() {
        let task = PlanningTask::parse(
            DOMAIN,
            "(define (problem p) (:domain tourism) (:objects Lonja - architecture tourist - person))",
        )
        .unwrap();
        let o = Ontology::from_task(&task);
        assert_eq!(o.root, "object");
        assert_eq!(o.parent("aquarium"), Some("attraction"));
        assert_eq!(o.individuals.get("Lonja").map(String::as_str), Some("architecture"));
        assert_eq!(o.len(), task.domain.types.len());
        o.validate().unwrap();
    }

    #[test]
    fn empty_task_gives_root_only() {
        let task = PlanningTask::parse("(define (domain d))", "(define (problem p) (:domain d))").unwrap();
        let o = Ontology::from_task(&task);
        assert_eq!(o.len(), 1);
        assert!(o.individuals.is_empty());
    }

    #[test]
    fn ancestors_include_self_and_root() {
        let mut o = Ontology::new("x", "root");
        o.add_concept(Concept::new("p", Some("root"))).unwrap();
        o.add_concept(Concept::new("c", Some("p"))).unwrap();
        assert_eq!(o.ancestors("root").unwrap(), vec!["root"]);
        assert_eq!(o.ancestors("c").unwrap(), vec!["c", "p", "root"]);
        assert!(matches!(o.ancestors("zzz"), Err(OntologyError::UnknownConcept(_))));
    }

    #[test]
    fn validate_finds_cycles_and_extra_roots() {
        let mut o = Ontology::new("x", "root");
        o.concepts.insert("a".into(), Concept::new("a", Some("b")));
        o.concepts.insert("b".into(), Concept::new("b", Some("a")));
        match o.validate() {
            Err(OntologyError::Cycle(c)) => {
                assert!(c.contains(&"a".to_string()) && c.contains(&"b".to_string()))
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut o = Ontology::new("x", "root");
        o.concepts.insert("other".into(), Concept::new("other", None));
        assert!(matches!(o.validate(), Err(OntologyError::MultipleRoots(_))));
    }
}
