use std::collections::BTreeMap;

use serde::Serialize;

use crate::planner::{validate, Violation, WorldState};
use crate::task::{ActionSchema, Atom, CondTime, EffTime, EffectKind, Minutes, Plan, PlanningTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TimedLiteral,
    Exogenous,
    ActionEnd,
    ActionStart,
    GoalCheck,
}

impl EventKind {
    /// Order among events sharing a timestamp. Start and end events of
    /// different steps share one band and are ordered by step instead.
    pub(crate) fn rank(self) -> u8 {
        match self {
            EventKind::TimedLiteral => 0,
            EventKind::Exogenous => 1,
            EventKind::ActionEnd | EventKind::ActionStart => 2,
            EventKind::GoalCheck => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Literal { positive: bool, atom: Atom },
    Action { step: usize, action: Atom },
    Goals { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimedEvent {
    pub time: Minutes,
    pub kind: EventKind,
    pub payload: Payload,
}

/// A validated plan expanded into chronologically ordered events, ending
/// with a goal check at the plan end.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub plan: Plan,
    pub events: Vec<TimedEvent>,
    pub cursor: usize,
}

impl Timeline {
    pub fn peek(&self) -> Option<&TimedEvent> {
        self.events.get(self.cursor)
    }

    pub fn next_event(&mut self) -> Option<TimedEvent> {
        let e = self.events.get(self.cursor).cloned();
        if e.is_some() {
            self.cursor += 1;
        }
        e
    }

    pub fn remaining(&self) -> &[TimedEvent] {
        &self.events[self.cursor.min(self.events.len())..]
    }

    /// Time of the final goal check.
    pub fn end(&self) -> Minutes {
        self.events.last().map(|e| e.time).unwrap_or_default()
    }
}

pub fn build_timeline(task: &PlanningTask, plan: &Plan) -> Result<Timeline, Violation> {
    if let Some(v) = validate(plan, task).violation {
        return Err(v);
    }
    let h = task.instance.horizon();
    let end = plan.end().unwrap_or(h.start).max(h.start);

    let mut keyed: Vec<((Minutes, u8, usize), TimedEvent)> = Vec::new();
    for (i, til) in task.instance.tils.iter().enumerate().filter(|(_, t)| t.time <= end) {
        let payload = Payload::Literal { positive: til.positive, atom: til.atom.clone() };
        keyed.push(((til.time, 0, i), TimedEvent { time: til.time, kind: EventKind::TimedLiteral, payload }));
    }
    for (i, s) in plan.steps.iter().enumerate() {
        for (time, kind, sub) in [(s.start, EventKind::ActionStart, 0), (s.end(), EventKind::ActionEnd, 1)] {
            let payload = Payload::Action { step: i, action: s.action.clone() };
            keyed.push(((time, kind.rank(), 2 * i + sub), TimedEvent { time, kind, payload }));
        }
    }
    let goals = Payload::Goals { atoms: task.instance.goals.clone() };
    keyed.push((
        (end, EventKind::GoalCheck.rank(), 0),
        TimedEvent { time: end, kind: EventKind::GoalCheck, payload: goals },
    ));
    keyed.sort_by_key(|(k, _)| *k);

    Ok(Timeline { plan: plan.clone(), events: keyed.into_iter().map(|(_, e)| e).collect(), cursor: 0 })
}

pub(crate) fn binding<'a>(schema: &'a ActionSchema, action: &'a Atom) -> BTreeMap<&'a str, &'a str> {
    schema.params.iter().map(|p| p.name.as_str()).zip(action.args.iter().map(String::as_str)).collect()
}

/// First condition of `action` that fails in `atoms`, rendered as a message.
pub(crate) fn unmet_condition(
    task: &PlanningTask,
    action: &Atom,
    atoms: &std::collections::BTreeSet<Atom>,
    over_all_only: bool,
) -> Option<String> {
    let Some(schema) = task.domain.action(&action.predicate) else {
        return Some(format!("unknown action `{}`", action.predicate));
    };
    let b = binding(schema, action);
    schema
        .conditions
        .iter()
        .filter(|c| !over_all_only || c.when == CondTime::OverAll)
        .find(|c| atoms.contains(&c.atom.ground(&b)) != c.positive)
        .map(|c| {
            let a = c.atom.ground(&b);
            if c.positive {
                format!("{action}: {a} does not hold")
            } else {
                format!("{action}: {a} holds")
            }
        })
}

/// Applies one effect phase of `action`: deletes, then adds, with numeric
/// updates evaluated against the fluents as they were before the phase.
pub(crate) fn apply_effects(
    task: &PlanningTask,
    state: &mut WorldState,
    action: &Atom,
    when: EffTime,
) -> Result<(), String> {
    let schema =
        task.domain.action(&action.predicate).ok_or_else(|| format!("unknown action `{}`", action.predicate))?;
    let b = binding(schema, action);
    let elapsed = (state.time - task.instance.horizon().start) as f64;
    let before = state.fluents.clone();
    let phase: Vec<&EffectKind> = schema.effects.iter().filter(|e| e.when == when).map(|e| &e.kind).collect();
    for k in &phase {
        if let EffectKind::Delete(t) = k {
            state.atoms.remove(&t.ground(&b));
        }
    }
    for k in &phase {
        match k {
            EffectKind::Add(t) => {
                state.atoms.insert(t.ground(&b));
            }
            EffectKind::Delete(_) => {}
            EffectKind::Increase(t, x) | EffectKind::Decrease(t, x) | EffectKind::Assign(t, x) => {
                let f = t.ground(&b);
                let v = x.eval(&b, &before, elapsed).ok_or_else(|| format!("{action}: undefined value for {f}"))?;
                let cur = before.get(&f).copied();
                let new = match (k, cur) {
                    (EffectKind::Assign(..), _) => v,
                    (EffectKind::Increase(..), Some(c)) => c + v,
                    (EffectKind::Decrease(..), Some(c)) => c - v,
                    _ => return Err(format!("{action}: fluent {f} is undefined")),
                };
                state.fluents.insert(f, new);
            }
        }
    }
    Ok(())
}

/// State of the task at horizon start, before any event.
pub fn initial_state(task: &PlanningTask) -> WorldState {
    WorldState {
        time: task.instance.horizon().start,
        atoms: task.instance.init.clone(),
        fluents: task.instance.fluents.clone(),
    }
}

/// Applies a timeline event to `state` without checking conditions.
pub fn apply_event(task: &PlanningTask, state: &mut WorldState, event: &TimedEvent) -> Result<(), String> {
    state.time = state.time.max(event.time);
    match (&event.payload, event.kind) {
        (Payload::Literal { positive: true, atom }, _) => {
            state.atoms.insert(atom.clone());
        }
        (Payload::Literal { positive: false, atom }, _) => {
            state.atoms.remove(atom);
        }
        (Payload::Action { action, .. }, EventKind::ActionStart) => {
            apply_effects(task, state, action, EffTime::AtStart)?
        }
        (Payload::Action { action, .. }, _) => apply_effects(task, state, action, EffTime::AtEnd)?,
        (Payload::Goals { .. }, _) => {}
    }
    Ok(())
}

/// Replays every event from the initial state.
pub fn replay(task: &PlanningTask, timeline: &Timeline) -> Result<WorldState, String> {
    let mut s = initial_state(task);
    for e in &timeline.events {
        apply_event(task, &mut s, e)?;
    }
    Ok(s)
}
