//! Timeline simulator and execution monitor.
//!
//! A plan is expanded into timed events and executed against two states:
//! the expected one, which only sees the plan and timed literals, and the
//! observed one, which also receives exogenous scenario events. Their
//! difference is classified and handed to a [`Hook`], which may swap in a
//! new plan.

mod scenario;
mod sim;
mod timeline;

use std::collections::BTreeSet;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use crate::task::{Atom, CondTime, Minutes, Plan, PlanningTask};

pub use scenario::{Scenario, ScenarioError, ScenarioEvent};
pub use sim::{
    run, AdoptedPlan, EventContext, ExecutionLog, FailureMode, FailureRecord, Hook, HookResponse, LogRecord, NoHook,
    RecordKind, Replacement, SimConfig, SimulationReport,
};
pub use timeline::{apply_event, build_timeline, initial_state, replay, EventKind, Payload, TimedEvent, Timeline};

pub(crate) fn ser_atoms<'a, S, I>(atoms: I, s: S) -> Result<S::Ok, S::Error>
where
    S: Serializer,
    I: IntoIterator<Item = &'a Atom>,
{
    let items: Vec<String> = atoms.into_iter().map(Atom::to_string).collect();
    let mut seq = s.serialize_seq(Some(items.len()))?;
    for i in &items {
        seq.serialize_element(i)?;
    }
    seq.end()
}

fn ser_set<S: Serializer>(atoms: &BTreeSet<Atom>, s: S) -> Result<S::Ok, S::Error> {
    ser_atoms(atoms, s)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiscrepancySet {
    #[serde(serialize_with = "ser_set")]
    pub observed_not_expected: BTreeSet<Atom>,
    #[serde(serialize_with = "ser_set")]
    pub expected_not_observed: BTreeSet<Atom>,
}

impl DiscrepancySet {
    pub fn is_empty(&self) -> bool {
        self.observed_not_expected.is_empty() && self.expected_not_observed.is_empty()
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.observed_not_expected.contains(a) || self.expected_not_observed.contains(a)
    }
}

pub fn discrepancies(expected: &BTreeSet<Atom>, observed: &BTreeSet<Atom>) -> DiscrepancySet {
    DiscrepancySet {
        observed_not_expected: observed.difference(expected).cloned().collect(),
        expected_not_observed: expected.difference(observed).cloned().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Confirmation,
    Failure,
    OpportunityKnownObject,
    OpportunityNewObject,
}

impl Tag {
    pub fn is_opportunity(self) -> bool {
        matches!(self, Tag::OpportunityKnownObject | Tag::OpportunityNewObject)
    }
}

/// One tag per discrepant atom, in atom order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    pub entries: Vec<(Atom, Tag)>,
}

impl Classification {
    pub fn tag(&self, atom: &Atom) -> Option<Tag> {
        self.entries.iter().find(|(a, _)| a == atom).map(|(_, t)| *t)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_tag(&self, tag: Tag) -> impl Iterator<Item = &Atom> + '_ {
        self.entries.iter().filter(move |(_, t)| *t == tag).map(|(a, _)| a)
    }
}

impl Serialize for Classification {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.entries.len()))?;
        for (a, t) in &self.entries {
            m.serialize_entry(&a.to_string(), t)?;
        }
        m.end()
    }
}

/// Predicates of goals plus the condition predicates of every action that
/// can add a goal predicate.
fn goal_relevant(task: &PlanningTask) -> BTreeSet<&str> {
    let goal_preds: BTreeSet<&str> = task.instance.goals.iter().map(|g| g.predicate.as_str()).collect();
    let mut out = goal_preds.clone();
    for a in &task.domain.actions {
        let achieves = a.effects.iter().any(|e| match &e.kind {
            crate::task::EffectKind::Add(t) => goal_preds.contains(t.predicate.as_str()),
            _ => false,
        });
        if achieves {
            out.extend(a.conditions.iter().map(|c| c.atom.predicate.as_str()));
        }
    }
    out
}

/// Ground conditions still ahead of the plan at `now`, as `(atom, positive)`.
/// Steps in progress contribute only their invariant conditions.
fn pending_conditions(task: &PlanningTask, plan: &Plan, now: Minutes) -> Vec<(Atom, bool)> {
    let mut out = Vec::new();
    for s in plan.steps.iter().filter(|s| s.end() > now || s.start >= now) {
        let Some(schema) = task.domain.action(&s.action.predicate) else {
            continue;
        };
        let b = timeline::binding(schema, &s.action);
        let running = s.start < now;
        for c in &schema.conditions {
            if running && c.when != CondTime::OverAll {
                continue;
            }
            out.push((c.atom.ground(&b), c.positive));
        }
    }
    out
}

pub fn classify(d: &DiscrepancySet, task: &PlanningTask, plan: &Plan, now: Minutes) -> Classification {
    let relevant = goal_relevant(task);
    let pending = pending_conditions(task, plan, now);
    let needed = |a: &Atom, positive: bool| pending.iter().any(|(p, pos)| p == a && *pos == positive);
    let objects = &task.instance.objects;

    let mut entries = Vec::new();
    for a in &d.observed_not_expected {
        let tag = if a.args.iter().any(|o| !objects.contains_key(o)) {
            Tag::OpportunityNewObject
        } else if needed(a, false) {
            Tag::Failure
        } else if relevant.contains(a.predicate.as_str()) {
            Tag::OpportunityKnownObject
        } else {
            Tag::Confirmation
        };
        entries.push((a.clone(), tag));
    }
    for a in &d.expected_not_observed {
        let tag = if needed(a, true) { Tag::Failure } else { Tag::Confirmation };
        entries.push((a.clone(), tag));
    }
    entries.sort();
    Classification { entries }
}
