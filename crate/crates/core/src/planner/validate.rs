//! Plan checking directly on the lifted task.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::ground::minutes;
use crate::task::{
    type_compatible, ActionSchema, Atom, CondTime, EffTime, EffectKind, Minutes, Plan, PlanningTask, TimedLiteral,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Index of the offending step; `None` for goal or plan-level problems.
    pub step: Option<usize>,
    pub time: Minutes,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {} at {}: {}", i + 1, self.time, self.message),
            None => write!(f, "at {}: {}", self.time, self.message),
        }
    }
}

/// Atoms and fluents at a time point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WorldState {
    pub time: Minutes,
    pub atoms: BTreeSet<Atom>,
    pub fluents: BTreeMap<Atom, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    pub violation: Option<Violation>,
    /// State at the plan end, or where checking stopped.
    pub final_state: WorldState,
    pub metric: Option<f64>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

struct Exec<'a> {
    task: &'a PlanningTask,
    tils: Vec<&'a TimedLiteral>,
    next_til: usize,
    state: WorldState,
}

impl<'a> Exec<'a> {
    fn advance(&mut self, t: Minutes) {
        while let Some(til) = self.tils.get(self.next_til) {
            if til.time > t {
                break;
            }
            if til.positive {
                self.state.atoms.insert(til.atom.clone());
            } else {
                self.state.atoms.remove(&til.atom);
            }
            self.next_til += 1;
        }
        self.state.time = self.state.time.max(t);
    }

    fn check(&self, schema: &ActionSchema, b: &BTreeMap<&str, &str>, over_all_only: bool) -> Option<String> {
        for c in &schema.conditions {
            if over_all_only && c.when != CondTime::OverAll {
                continue;
            }
            let atom = c.atom.ground(b);
            if self.state.atoms.contains(&atom) != c.positive {
                let lit = if c.positive { atom.to_string() } else { format!("(not {atom})") };
                let kind = match c.when {
                    CondTime::AtStart => "at start",
                    CondTime::OverAll => "over all",
                };
                return Some(format!("{kind} condition {lit} does not hold"));
            }
        }
        None
    }

    fn apply(
        &mut self,
        schema: &ActionSchema,
        b: &BTreeMap<&str, &str>,
        when: EffTime,
        elapsed: f64,
    ) -> Option<String> {
        let before = self.state.fluents.clone();
        let effects: Vec<_> = schema.effects.iter().filter(|e| e.when == when).collect();
        for e in &effects {
            if let EffectKind::Delete(t) = &e.kind {
                self.state.atoms.remove(&t.ground(b));
            }
        }
        for e in &effects {
            match &e.kind {
                EffectKind::Add(t) => {
                    self.state.atoms.insert(t.ground(b));
                }
                EffectKind::Delete(_) => {}
                EffectKind::Increase(t, x) | EffectKind::Decrease(t, x) | EffectKind::Assign(t, x) => {
                    let f = t.ground(b);
                    let Some(v) = x.eval(b, &before, elapsed) else {
                        return Some(format!("effect on {f} uses an undefined value"));
                    };
                    let new = match (&e.kind, before.get(&f)) {
                        (EffectKind::Assign(..), _) => v,
                        (EffectKind::Increase(..), Some(cur)) => cur + v,
                        (EffectKind::Decrease(..), Some(cur)) => cur - v,
                        _ => return Some(format!("fluent {f} is undefined")),
                    };
                    self.state.fluents.insert(f, new);
                }
            }
        }
        None
    }
}

/// Replays `plan` from the task's initial state and reports the first
/// violated condition, overlap, horizon breach or unmet goal.
pub fn validate(plan: &Plan, task: &PlanningTask) -> Validation {
    let inst = &task.instance;
    let h = inst.horizon();
    let mut ex = Exec {
        task,
        tils: inst.tils.iter().collect(),
        next_til: 0,
        state: WorldState { time: h.start, atoms: inst.init.clone(), fluents: inst.fluents.clone() },
    };
    ex.advance(h.start);
    let elapsed = |t: Minutes| (t - h.start) as f64;
    let fail = |ex: Exec, step: Option<usize>, time: Minutes, message: String| Validation {
        violation: Some(Violation { step, time, message }),
        final_state: ex.state,
        metric: None,
    };

    for (i, step) in plan.steps.iter().enumerate() {
        let at = Some(i);
        if step.start < ex.state.time {
            let what = if i == 0 { "task start" } else { "the end of the previous step" };
            let m = format!("starts before {what} ({})", ex.state.time);
            return fail(ex, at, step.start, m);
        }
        let Some(schema) = ex.task.domain.action(&step.action.predicate) else {
            return fail(ex, at, step.start, format!("unknown action `{}`", step.action.predicate));
        };
        if schema.params.len() != step.action.args.len() {
            return fail(ex, at, step.start, format!("`{}` expects {} arguments", schema.name, schema.params.len()));
        }
        for (p, a) in schema.params.iter().zip(&step.action.args) {
            let ok = inst
                .object_type(a)
                .map(|ty| type_compatible(ty, &p.ty, &task.domain.types).unwrap_or(false))
                .unwrap_or(false);
            if !ok {
                return fail(ex, at, step.start, format!("argument `{a}` does not fit {} - {}", p.name, p.ty));
            }
        }
        let b: BTreeMap<&str, &str> =
            schema.params.iter().map(|p| p.name.as_str()).zip(step.action.args.iter().map(String::as_str)).collect();

        ex.advance(step.start);
        if let Some(m) = ex.check(schema, &b, false) {
            return fail(ex, at, step.start, m);
        }
        let dur = schema.duration.eval(&b, &ex.state.fluents, elapsed(step.start)).and_then(minutes);
        match dur {
            None => return fail(ex, at, step.start, "duration is undefined".into()),
            Some(d) if d != step.duration => {
                return fail(ex, at, step.start, format!("duration {} differs from the computed {d}", step.duration));
            }
            Some(_) => {}
        }
        let end = step.end();
        if end > h.end {
            return fail(ex, at, end, format!("ends after the horizon ({})", h.end));
        }
        if let Some(m) = ex.apply(schema, &b, EffTime::AtStart, elapsed(step.start)) {
            return fail(ex, at, step.start, m);
        }
        if let Some(m) = ex.check(schema, &b, true) {
            return fail(ex, at, step.start, m);
        }
        while let Some(til) = ex.tils.get(ex.next_til) {
            if til.time > end {
                break;
            }
            let t = til.time;
            ex.advance(t);
            if let Some(m) = ex.check(schema, &b, true) {
                return fail(ex, at, t, m);
            }
        }
        ex.state.time = end;
        if let Some(m) = ex.apply(schema, &b, EffTime::AtEnd, elapsed(end)) {
            return fail(ex, at, end, m);
        }
    }

    let end = ex.state.time;
    if let Some(g) = inst.goals.iter().find(|g| !ex.state.atoms.contains(g)) {
        let m = format!("goal {g} is not achieved");
        return fail(ex, None, end, m);
    }
    let metric = inst.metric().expr.eval(&BTreeMap::new(), &ex.state.fluents, elapsed(end));
    Validation { violation: None, final_state: ex.state, metric }
}

/// Value of the task metric at the end of a valid plan.
pub fn metric_value(plan: &Plan, task: &PlanningTask) -> Result<f64, Violation> {
    let v = validate(plan, task);
    if let Some(viol) = v.violation {
        return Err(viol);
    }
    v.metric.ok_or_else(|| Violation {
        step: None,
        time: v.final_state.time,
        message: "metric is undefined at the plan end".into(),
    })
}
