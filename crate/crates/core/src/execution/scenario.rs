use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::integration::ObjectFacts;
use crate::task::{parse_atom, Atom, Minutes};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario: {0}")]
    Schema(String),
    #[error("scenario event {index}: {msg}")]
    Event { index: usize, msg: String },
}

/// Instantaneous observation: literals retracted, then asserted, plus
/// optional facts about the objects involved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub time: Minutes,
    pub assert: Vec<Atom>,
    pub retract: Vec<Atom>,
    pub facts: BTreeMap<String, ObjectFacts>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub events: Vec<ScenarioEvent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    time: Minutes,
    #[serde(default)]
    assert: Vec<String>,
    #[serde(default)]
    retract: Vec<String>,
    #[serde(default)]
    facts: BTreeMap<String, ObjectFacts>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    events: Vec<RawEvent>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        let mut events = Vec::with_capacity(raw.events.len());
        for (index, e) in raw.events.into_iter().enumerate() {
            let atoms = |v: Vec<String>| -> Result<Vec<Atom>, ScenarioError> {
                v.iter()
                    .map(|s| parse_atom(s).map_err(|err| ScenarioError::Event { index, msg: err.to_string() }))
                    .collect()
            };
            let ev =
                ScenarioEvent { time: e.time, assert: atoms(e.assert)?, retract: atoms(e.retract)?, facts: e.facts };
            if let Some(prev) = events.last().map(|p: &ScenarioEvent| p.time) {
                if ev.time < prev {
                    return Err(ScenarioError::Event { index, msg: format!("time {} precedes {prev}", ev.time) });
                }
            }
            events.push(ev);
        }
        Ok(Scenario { events })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let p = path.as_ref();
        let text =
            std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.display().to_string(), source })?;
        Scenario::from_json(&text)
    }
}
