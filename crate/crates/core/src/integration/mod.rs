//! Integration of a newly observed object into a running task: find the
//! ontologies that know it, pick the most detailed one, position its type,
//! pull its facts from a data provider, derive candidate goals and keep the
//! best one a planner can achieve.

mod evaluate;
mod instantiate;
mod pipeline;
mod provider;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::matching::{position_type_with, MatchConfig, PositionOutcome, Positioning};
use crate::ontology::{semantic_variance, Ontology, OntologyError, SvMode};
use crate::par::Execution;
use crate::planner::WorldState;
use crate::task::{type_compatible, Atom, Minutes, PlanningTask, TaskError, TypeExpr, ROOT_TYPE};
use crate::text::same_name;

pub use evaluate::{evaluate_opportunities, Evaluation, OpportunityDecision, Verdict};
pub use instantiate::{instantiate_variables, requirements, Instantiation, Requirements};
pub use pipeline::{ObjectRun, Outcome, Pipeline, PipelineConfig, PipelineRun};
#[cfg(feature = "online")]
pub use provider::HttpDataProvider;
pub use provider::{
    haversine_km, walk_minutes, DataProvider, FileDataProvider, ObjectFacts, ProviderError, WALK_SPEED_KMH,
};

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error("no ontology to select from")]
    NoOntology,
    #[error("object `{0}` is not an individual of the selected ontology")]
    NotInOntology(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("insufficient data for `{object}`: {msg}")]
    InsufficientData { object: String, msg: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// An observed proposition mentioning objects outside the task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoveltyReport {
    #[serde(serialize_with = "ser_atom")]
    pub proposition: Atom,
    pub unknown_objects: Vec<String>,
    pub arrival_time: Minutes,
}

impl NoveltyReport {
    pub fn new(task: &PlanningTask, proposition: Atom, arrival_time: Minutes) -> Self {
        let mut unknown_objects = Vec::new();
        for a in &proposition.args {
            if !task.instance.objects.contains_key(a) && !unknown_objects.contains(a) {
                unknown_objects.push(a.clone());
            }
        }
        NoveltyReport { proposition, unknown_objects, arrival_time }
    }
}

/// Ontologies with an individual whose name matches `object`.
pub fn locate_object<'a>(object: &str, repo: &'a [Ontology]) -> Vec<&'a Ontology> {
    repo.iter().filter(|o| individual_of(o, object).is_some()).collect()
}

/// `(individual id, concept id)` of the individual matching `object`.
pub fn individual_of<'a>(o: &'a Ontology, object: &str) -> Option<(&'a str, &'a str)> {
    o.individuals
        .get_key_value(object)
        .or_else(|| o.individuals.iter().find(|(id, _)| same_name(id, object)))
        .map(|(i, c)| (i.as_str(), c.as_str()))
}

/// Highest semantic variance wins; ties go to the smaller id.
pub fn select_ontology<'a>(candidates: &[&'a Ontology], mode: SvMode) -> Result<(&'a Ontology, f64), IntegrationError> {
    let mut best: Option<(&Ontology, f64)> = None;
    for o in candidates {
        let sv = semantic_variance(o, mode)?;
        best = match best {
            Some((b, bsv)) if bsv > sv || (bsv == sv && b.id <= o.id) => Some((b, bsv)),
            _ => Some((o, sv)),
        };
    }
    best.ok_or(IntegrationError::NoOntology)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrationOutcome {
    /// The concept name is already a task type.
    ExistingType {
        ty: String,
    },
    EquivalentType {
        ty: String,
    },
    NewType {
        ty: String,
        parent: String,
    },
    Unplaced {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrationReport {
    pub object: String,
    pub ontology: String,
    pub concept: String,
    pub outcome: IntegrationOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positioning: Option<Positioning>,
}

impl IntegrationReport {
    /// Type the object received in the task, if any.
    pub fn object_type(&self) -> Option<&str> {
        match &self.outcome {
            IntegrationOutcome::ExistingType { ty }
            | IntegrationOutcome::EquivalentType { ty }
            | IntegrationOutcome::NewType { ty, .. } => Some(ty),
            IntegrationOutcome::Unplaced { .. } => None,
        }
    }
}

/// Extended copies of the task and its ontology; both `None` when the type
/// could not be placed.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationResult {
    pub report: IntegrationReport,
    pub task: Option<PlanningTask>,
    pub n_phi: Option<Ontology>,
}

pub fn integrate_object(
    task: &PlanningTask,
    object: &str,
    n_phi: &Ontology,
    n_o: &Ontology,
    cfg: &MatchConfig,
    exec: Execution,
) -> Result<IntegrationResult, IntegrationError> {
    let (_, c_t) = individual_of(n_o, object).ok_or_else(|| IntegrationError::NotInOntology(object.into()))?;
    let mut report = IntegrationReport {
        object: object.into(),
        ontology: n_o.id.clone(),
        concept: c_t.into(),
        outcome: IntegrationOutcome::Unplaced { reason: String::new() },
        positioning: None,
    };
    let mut t = task.clone();
    let mut n = n_phi.clone();

    let ty = if c_t != ROOT_TYPE && task.domain.types.contains(c_t) {
        report.outcome = IntegrationOutcome::ExistingType { ty: c_t.into() };
        c_t.to_string()
    } else {
        let p = position_type_with(n_phi, n_o, c_t, cfg, exec)?;
        let outcome = p.outcome.clone();
        report.positioning = Some(p);
        match outcome {
            PositionOutcome::EquivalentTo(c) => {
                report.outcome = IntegrationOutcome::EquivalentType { ty: c.clone() };
                c
            }
            PositionOutcome::NewChildOf(parent) => {
                t.add_type(c_t, &parent)?;
                let mut concept = n_o.concept(c_t).cloned().expect("located concept exists");
                concept.parent = Some(parent.clone());
                n.add_concept(concept)?;
                report.outcome = IntegrationOutcome::NewType { ty: c_t.into(), parent };
                c_t.to_string()
            }
            PositionOutcome::Unplaced(reason) => {
                report.outcome = IntegrationOutcome::Unplaced { reason };
                return Ok(IntegrationResult { report, task: None, n_phi: None });
            }
        }
    };
    t.add_object(object, &ty)?;
    n.add_individual(object, &ty)?;
    Ok(IntegrationResult { report, task: Some(t), n_phi: Some(n) })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CandidateGoal {
    #[serde(serialize_with = "ser_atom")]
    pub atom: Atom,
    /// The existing goal whose shape licensed this one.
    #[serde(serialize_with = "ser_atom")]
    pub provenance: Atom,
}

pub(crate) fn ser_atom<S: serde::Serializer>(a: &Atom, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(a)
}

/// Whether a goal position holding an object of type `held` may take an
/// object of type `t`: same type, siblings below a common non-root parent,
/// or `t` a direct child of the position's declared type.
fn position_accepts(task: &PlanningTask, t: &str, held: &str, declared: &TypeExpr) -> bool {
    let types = &task.domain.types;
    if !type_compatible(t, declared, types).unwrap_or(false) {
        return false;
    }
    let parent = types.parent(t);
    t == held
        || (parent.is_some_and(|p| p != ROOT_TYPE) && parent == types.parent(held))
        || matches!(declared, TypeExpr::Single(d) if Some(d.as_str()) == parent)
}

/// New goal atoms for `object` of type `t`, one per accepting position of
/// each existing goal, other positions copied from that goal. Existing goals
/// and duplicates are dropped.
pub fn formulate_goals(task: &PlanningTask, object: &str, t: &str) -> Vec<CandidateGoal> {
    let existing: BTreeSet<&Atom> = task.instance.goals.iter().collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for g in &task.instance.goals {
        let Some(schema) = task.domain.predicate(&g.predicate) else {
            continue;
        };
        for (i, (arg, param)) in g.args.iter().zip(&schema.params).enumerate() {
            let Some(held) = task.instance.object_type(arg) else {
                continue;
            };
            if !position_accepts(task, t, held, &param.ty) {
                continue;
            }
            let mut atom = g.clone();
            atom.args[i] = object.to_string();
            if existing.contains(&atom) || !seen.insert(atom.clone()) {
                continue;
            }
            out.push(CandidateGoal { atom, provenance: g.clone() });
        }
    }
    out
}

/// The task restarted from `state` at `now`: current atoms and fluents as
/// the initial state, only later timed literals, horizon starting at `now`.
/// Atoms about objects the task does not declare are left out.
pub fn rebase(task: &PlanningTask, state: &WorldState, now: Minutes) -> PlanningTask {
    let mut t = task.clone();
    let objects = &task.instance.objects;
    let known = |a: &Atom| a.args.iter().all(|o| objects.contains_key(o));
    t.instance.init = state.atoms.iter().filter(|a| known(a)).cloned().collect();
    t.instance.fluents = state.fluents.iter().filter(|(a, _)| known(a)).map(|(a, v)| (a.clone(), *v)).collect();
    t.instance.tils.retain(|l| l.time > now);
    let mut h = t.instance.horizon();
    h.start = now;
    t.instance.horizon = Some(h);
    t
}
