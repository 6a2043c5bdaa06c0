//! JSON interchange format, one document per ontology.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Annotation, Concept, Ontology, OntologyError, LABEL_REL};
use crate::enrichment::Relation;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConcept {
    id: String,
    parent: Option<String>,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    annotations: Vec<Annotation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndividual {
    id: String,
    concept: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOntology {
    id: String,
    root: String,
    concepts: Vec<RawConcept>,
    #[serde(default)]
    individuals: Vec<RawIndividual>,
}

impl Ontology {
    pub fn from_json(text: &str, origin: &str) -> Result<Ontology, OntologyError> {
        let raw: RawOntology = serde_json::from_str(text)
            .map_err(|e| OntologyError::Schema { path: origin.into(), msg: e.to_string() })?;
        let mut concepts = BTreeMap::new();
        for c in raw.concepts {
            for a in &c.annotations {
                if a.rel != LABEL_REL && Relation::parse(&a.rel).is_none() {
                    return Err(OntologyError::BadRelation { concept: c.id.clone(), rel: a.rel.clone() });
                }
            }
            let id = c.id.clone();
            let concept = Concept { id: c.id, parent: c.parent, labels: c.labels, annotations: c.annotations };
            if concepts.insert(id.clone(), concept).is_some() {
                return Err(OntologyError::DuplicateConcept(id));
            }
        }
        let mut individuals = BTreeMap::new();
        for i in raw.individuals {
            if individuals.insert(i.id.clone(), i.concept).is_some() {
                return Err(OntologyError::DuplicateIndividual(i.id));
            }
        }
        let o = Ontology { id: raw.id, root: raw.root, concepts, individuals };
        o.validate()?;
        Ok(o)
    }

    pub fn to_json(&self) -> String {
        let raw = RawOntology {
            id: self.id.clone(),
            root: self.root.clone(),
            concepts: self
                .concepts
                .values()
                .map(|c| RawConcept {
                    id: c.id.clone(),
                    parent: c.parent.clone(),
                    labels: c.labels.clone(),
                    annotations: c.annotations.clone(),
                })
                .collect(),
            individuals: self
                .individuals
                .iter()
                .map(|(id, concept)| RawIndividual { id: id.clone(), concept: concept.clone() })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&raw).unwrap_or_default();
        s.push('\n');
        s
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Ontology, OntologyError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| OntologyError::Io { path: path.display().to_string(), msg: e.to_string() })?;
    Ontology::from_json(&text, &path.display().to_string())
}

pub fn save(o: &Ontology, path: impl AsRef<Path>) -> Result<(), OntologyError> {
    let path = path.as_ref();
    fs::write(path, o.to_json()).map_err(|e| OntologyError::Io { path: path.display().to_string(), msg: e.to_string() })
}

/// Ordered list of candidate ontologies with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OntologyRepository {
    pub ontologies: Vec<Ontology>,
}

impl OntologyRepository {
    pub fn new(ontologies: Vec<Ontology>) -> Result<Self, OntologyError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &ontologies {
            if !seen.insert(o.id.clone()) {
                return Err(OntologyError::DuplicateOntology(o.id.clone()));
            }
        }
        Ok(OntologyRepository { ontologies })
    }

    pub fn get(&self, id: &str) -> Option<&Ontology> {
        self.ontologies.iter().find(|o| o.id == id)
    }

    pub fn len(&self) -> usize {
        self.ontologies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ontologies.is_empty()
    }
}

/// Loads every `*.json` file in `dir`, in file-name order.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<OntologyRepository, OntologyError> {
    let dir = dir.as_ref();
    let entries =
        fs::read_dir(dir).map_err(|e| OntologyError::Io { path: dir.display().to_string(), msg: e.to_string() })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    OntologyRepository::new(paths.iter().map(load).collect::<Result<Vec<_>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Ontology {
        let mut o = Ontology::new("A", "object");
        o.add_concept(Concept::new("attraction", Some("object"))).unwrap();
        let mut aq = Concept::new("aquarium", Some("attraction"));
        aq.labels.push("aquarium".into());
        aq.annotations.push(Annotation::new("atLocation", "sea"));
        o.add_concept(aq).unwrap();
        o.add_individual("Oceanografic", "aquarium").unwrap();
        o
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let o = three();
        save(&o, &p).unwrap();
        assert_eq!(load(&p).unwrap(), o);
    }

    #[test]
    fn cycle_is_reported_with_names() {
        let text = r#"{"id":"x","root":"r","concepts":[
            {"id":"r","parent":null,"labels":[],"annotations":[]},
            {"id":"a","parent":"b","labels":[],"annotations":[]},
            {"id":"b","parent":"a","labels":[],"annotations":[]}],"individuals":[]}"#;
        let e = Ontology::from_json(text, "x.json").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, OntologyError::Cycle(_)));
        assert!(msg.contains('a') && msg.contains('b'));
    }

    #[test]
    fn schema_and_vocabulary_violations() {
        let e = Ontology::from_json(r#"{"id":"x","concepts":[]}"#, "x.json").unwrap_err();
        assert!(matches!(e, OntologyError::Schema { .. }));
        let e = Ontology::from_json(
            r#"{"id":"x","root":"r","concepts":[{"id":"r","parent":null,"labels":[],"annotations":[{"rel":"likes","val":"y"}]}]}"#,
            "x.json",
        )
        .unwrap_err();
        assert!(matches!(e, OntologyError::BadRelation { .. }));
        let e = Ontology::from_json(
            r#"{"id":"x","root":"r","concepts":[{"id":"r","parent":null},{"id":"s","parent":null}]}"#,
            "x.json",
        )
        .unwrap_err();
        assert!(matches!(e, OntologyError::MultipleRoots(_)));
    }

    #[test]
    fn repository_rejects_duplicate_ids() {
        assert!(OntologyRepository::new(vec![three(), three()]).is_err());
    }
}
