use std::collections::BTreeSet;

use serde::Serialize;

use super::provider::{walk_minutes, DataProvider};
use super::IntegrationError;
use crate::task::{parse_atom, type_compatible, Atom, EffectKind, Minutes, PlanningTask, TimedLiteral, TypeExpr};

/// Facts a task needs about an object of a given type, by function or
/// predicate name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Requirements {
    /// Binary duration functions between two places of this kind.
    pub travel: Vec<String>,
    /// Unary duration functions of the object.
    pub stay: Vec<String>,
    /// Unary predicates driven by timed literals.
    pub windows: Vec<String>,
}

impl Requirements {
    pub fn is_empty(&self) -> bool {
        self.travel.is_empty() && self.stay.is_empty() && self.windows.is_empty()
    }
}

fn accepts(task: &PlanningTask, ty: &str, e: &TypeExpr) -> bool {
    type_compatible(ty, e, &task.domain.types).unwrap_or(false)
}

pub fn requirements(task: &PlanningTask, ty: &str) -> Requirements {
    let mut duration_fns = BTreeSet::new();
    for a in &task.domain.actions {
        let mut fs = Vec::new();
        a.duration.fluents(&mut fs);
        duration_fns.extend(fs.into_iter().map(|t| t.predicate));
    }
    let mut r = Requirements::default();
    for f in &task.domain.functions {
        if !duration_fns.contains(&f.name) {
            continue;
        }
        match f.params.as_slice() {
            [p] if accepts(task, ty, &p.ty) => r.stay.push(f.name.clone()),
            [p, q] if accepts(task, ty, &p.ty) && accepts(task, ty, &q.ty) => r.travel.push(f.name.clone()),
            _ => {}
        }
    }
    let effects: BTreeSet<&str> = task
        .domain
        .actions
        .iter()
        .flat_map(|a| &a.effects)
        .filter_map(|e| match &e.kind {
            EffectKind::Add(t) | EffectKind::Delete(t) => Some(t.predicate.as_str()),
            _ => None,
        })
        .collect();
    let timed: BTreeSet<&str> = task.instance.tils.iter().map(|l| l.atom.predicate.as_str()).collect();
    for p in &task.domain.predicates {
        if let [q] = p.params.as_slice() {
            if timed.contains(p.name.as_str()) && !effects.contains(p.name.as_str()) && accepts(task, ty, &q.ty) {
                r.windows.push(p.name.clone());
            }
        }
    }
    r
}

/// State additions for one object.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Instantiation {
    pub object: String,
    pub requirements: Requirements,
    #[serde(serialize_with = "ser_atoms")]
    pub atoms: Vec<Atom>,
    #[serde(serialize_with = "ser_fluents")]
    pub fluents: Vec<(Atom, f64)>,
    #[serde(serialize_with = "ser_tils")]
    pub tils: Vec<TimedLiteral>,
}

fn ser_atoms<S: serde::Serializer>(v: &[Atom], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|a| a.to_string()))
}

fn ser_fluents<S: serde::Serializer>(v: &[(Atom, f64)], s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(v.iter().map(|(a, x)| (a.to_string(), x)))
}

fn ser_tils<S: serde::Serializer>(v: &[TimedLiteral], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|l| l.to_string()))
}

impl Instantiation {
    pub fn apply(&self, task: &mut PlanningTask) {
        let inst = &mut task.instance;
        inst.init.extend(self.atoms.iter().cloned());
        for (a, v) in &self.fluents {
            inst.fluents.insert(a.clone(), *v);
        }
        inst.tils.extend(self.tils.iter().cloned());
        inst.tils.sort_by_key(|l| l.time);
    }
}

/// Derives the object's atoms, fluents and timed literals from provider
/// data. `task` must already declare the object; `trigger` atoms are
/// asserted as observed. Missing required data is an error, never a default.
pub fn instantiate_variables(
    task: &PlanningTask,
    object: &str,
    provider: &dyn DataProvider,
    trigger: &[Atom],
    now: Minutes,
) -> Result<Instantiation, IntegrationError> {
    let insufficient = |msg: String| IntegrationError::InsufficientData { object: object.into(), msg };
    let ty = task.instance.object_type(object).ok_or_else(|| insufficient("not declared in the task".into()))?;
    let req = requirements(task, ty);
    let facts = provider.facts(object)?.unwrap_or_default();
    let mut out = Instantiation { object: object.into(), requirements: req.clone(), ..Default::default() };

    for f in &req.stay {
        let d = facts.visit_duration.ok_or_else(|| insufficient(format!("no visit duration for `{f}`")))?;
        out.fluents.push((Atom::new(f.clone(), vec![object.to_string()]), d));
    }

    if !req.travel.is_empty() {
        let here = facts.coordinates();
        for f in &req.travel {
            let schema = task.domain.function(f).expect("required function exists");
            let others: Vec<&String> = task
                .instance
                .objects
                .iter()
                .filter(|(o, t)| *o != object && schema.params.iter().all(|p| accepts(task, t, &p.ty)))
                .map(|(o, _)| o)
                .collect();
            for other in others {
                let theirs = provider.facts(other)?.unwrap_or_default();
                let explicit = facts.durations.get(other.as_str()).or_else(|| theirs.durations.get(object)).copied();
                let minutes = match (explicit, here, theirs.coordinates()) {
                    (Some(m), _, _) => m,
                    (None, Some(a), Some(b)) => walk_minutes(a, b) as f64,
                    (None, None, _) => return Err(insufficient("no coordinates".into())),
                    (None, _, None) => return Err(insufficient(format!("no coordinates for `{other}`"))),
                };
                for (x, y) in [(object, other.as_str()), (other.as_str(), object)] {
                    let a = Atom::new(f.clone(), vec![x.to_string(), y.to_string()]);
                    if !task.instance.fluents.contains_key(&a) {
                        out.fluents.push((a, minutes));
                    }
                }
            }
        }
    }

    let h = task.instance.horizon();
    for p in &req.windows {
        if facts.open.is_empty() {
            return Err(insufficient(format!("no opening windows for `{p}`")));
        }
        let atom = Atom::new(p.clone(), vec![object.to_string()]);
        for &(open, close) in &facts.open {
            if close <= now || open > h.end {
                continue;
            }
            if open <= now {
                out.atoms.push(atom.clone());
            } else {
                out.tils.push(TimedLiteral { time: open, positive: true, atom: atom.clone() });
            }
            if close <= h.end {
                out.tils.push(TimedLiteral { time: close, positive: false, atom: atom.clone() });
            }
        }
    }

    for a in trigger.iter().filter(|a| a.mentions(object)) {
        task.check_atom(a)?;
        out.atoms.push(a.clone());
    }
    for e in &facts.extra {
        let a = parse_atom(e)?;
        task.check_atom(&a)?;
        out.atoms.push(a);
    }
    out.atoms.sort();
    out.atoms.dedup();
    Ok(out)
}
