use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::timeline::{apply_effects, apply_event, build_timeline, initial_state, unmet_condition};
use super::{
    classify, discrepancies, ser_atoms, Classification, DiscrepancySet, EventKind, Payload, Scenario, ScenarioEvent,
    TimedEvent, Timeline,
};
use crate::integration::ObjectFacts;
use crate::planner::WorldState;
use crate::task::{Atom, EffTime, Minutes, Plan, PlanStep, PlanningTask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// Record violated conditions and keep executing.
    #[default]
    ReportOnly,
    /// Stop at the first violated condition.
    Halt,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Delay an adopted plan by the wall-clock time spent in the hook,
    /// rounded up to whole minutes.
    pub charge_planning_time: bool,
    pub failure_mode: FailureMode,
}

/// What a hook sees when an observation may carry an opportunity.
pub struct EventContext<'a> {
    pub now: Minutes,
    pub task: &'a PlanningTask,
    pub plan: &'a Plan,
    pub observed: &'a WorldState,
    pub discrepancies: &'a DiscrepancySet,
    pub classification: &'a Classification,
    /// Atoms changed by the triggering event that are still discrepant.
    pub fresh: &'a [Atom],
    pub facts: &'a BTreeMap<String, ObjectFacts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    pub task: PlanningTask,
    pub plan: Plan,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HookResponse {
    pub report: Option<serde_json::Value>,
    pub replacement: Option<Replacement>,
}

pub trait Hook {
    fn on_event(&mut self, ctx: &EventContext<'_>) -> HookResponse;
}

/// Observes without reacting.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHook;

impl Hook for NoHook {
    fn on_event(&mut self, _ctx: &EventContext<'_>) -> HookResponse {
        HookResponse::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    TimedLiteral,
    Exogenous,
    ActionStart,
    ActionEnd,
    GoalCheck,
    Opportunity,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Delta {
    #[serde(serialize_with = "ser_vec", skip_serializing_if = "Vec::is_empty")]
    pub add: Vec<Atom>,
    #[serde(serialize_with = "ser_vec", skip_serializing_if = "Vec::is_empty")]
    pub del: Vec<Atom>,
}

impl Delta {
    fn between(before: &BTreeSet<Atom>, after: &BTreeSet<Atom>) -> Delta {
        Delta { add: after.difference(before).cloned().collect(), del: before.difference(after).cloned().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.del.is_empty()
    }
}

fn ser_vec<S: serde::Serializer>(v: &[Atom], s: S) -> Result<S::Ok, S::Error> {
    ser_atoms(v, s)
}

fn ser_opt_vec<S: serde::Serializer>(v: &Option<Vec<Atom>>, s: S) -> Result<S::Ok, S::Error> {
    ser_atoms(v.iter().flatten(), s)
}

/// One processed event. Contains no wall-clock values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub seq: usize,
    pub time: Minutes,
    pub kind: RecordKind,
    pub plan_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(skip_serializing_if = "Delta::is_empty")]
    pub expected: Delta,
    #[serde(skip_serializing_if = "Delta::is_empty")]
    pub observed: Delta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancies: Option<DiscrepancySet>,
    #[serde(skip_serializing_if = "Classification::is_empty")]
    pub classification: Classification,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
    #[serde(serialize_with = "ser_opt_vec", skip_serializing_if = "Option::is_none")]
    pub unmet_goals: Option<Vec<Atom>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opportunity: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adopted_plan: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LogRecord {
    fn new(time: Minutes, kind: RecordKind, plan_id: usize) -> Self {
        LogRecord {
            seq: 0,
            time,
            kind,
            plan_id,
            action: None,
            expected: Delta::default(),
            observed: Delta::default(),
            discrepancies: None,
            classification: Classification::default(),
            failures: Vec::new(),
            unmet_goals: None,
            opportunity: None,
            adopted_plan: None,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub time: Minutes,
    pub plan_id: usize,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdoptedPlan {
    pub id: usize,
    pub adopted_at: Minutes,
    pub end: Minutes,
    /// Actions completed before adoption plus those in the plan, by name.
    pub projected: BTreeMap<String, usize>,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub plans: Vec<AdoptedPlan>,
    /// Completed actions by name.
    pub completed: BTreeMap<String, usize>,
    pub goals_met: bool,
    #[serde(serialize_with = "ser_vec")]
    pub unmet_goals: Vec<Atom>,
    pub failures: Vec<FailureRecord>,
    pub opportunities: Vec<serde_json::Value>,
    pub end_time: Minutes,
    #[serde(serialize_with = "ser_final")]
    pub final_state: WorldState,
}

fn ser_final<S: serde::Serializer>(w: &WorldState, s: S) -> Result<S::Ok, S::Error> {
    ser_atoms(&w.atoms, s)
}

impl SimulationReport {
    pub fn completed(&self, action: &str) -> usize {
        self.completed.get(action).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionLog {
    pub records: Vec<LogRecord>,
    pub report: SimulationReport,
    /// Wall-clock milliseconds spent in hooks; kept out of the records.
    #[serde(skip)]
    pub hook_millis: u128,
}

impl ExecutionLog {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("log record serializes") + "\n").collect()
    }
}

struct Pending {
    fresh: Vec<Atom>,
    facts: BTreeMap<String, ObjectFacts>,
}

struct Sim<'h> {
    task: PlanningTask,
    timeline: Timeline,
    plan_id: usize,
    expected: WorldState,
    observed: WorldState,
    active: Option<usize>,
    failed_steps: BTreeSet<(usize, usize)>,
    pending: Vec<Pending>,
    records: Vec<LogRecord>,
    failures: Vec<FailureRecord>,
    completed: BTreeMap<String, usize>,
    plans: Vec<AdoptedPlan>,
    opportunities: Vec<serde_json::Value>,
    unmet: Option<Vec<Atom>>,
    halted: bool,
    hook: &'h mut dyn Hook,
    cfg: SimConfig,
    hook_millis: u128,
}

fn adopted(id: usize, at: Minutes, plan: &Plan, completed: &BTreeMap<String, usize>) -> AdoptedPlan {
    let mut projected = completed.clone();
    for s in &plan.steps {
        *projected.entry(s.action.predicate.clone()).or_default() += 1;
    }
    AdoptedPlan {
        id,
        adopted_at: at,
        end: plan.end().unwrap_or(at),
        projected,
        steps: plan.steps.iter().map(|s| format!("{}: {} [{}]", s.start, s.action, s.duration)).collect(),
    }
}

impl Sim<'_> {
    fn push(&mut self, mut r: LogRecord) -> usize {
        r.seq = self.records.len();
        self.records.push(r);
        self.records.len() - 1
    }

    fn fail(&mut self, rec: &mut LogRecord, step: Option<usize>, message: String) {
        if let Some(s) = step {
            if !self.failed_steps.insert((self.plan_id, s)) {
                return;
            }
        }
        rec.failures.push(message.clone());
        self.failures.push(FailureRecord { time: rec.time, plan_id: self.plan_id, step, message });
        if self.cfg.failure_mode == FailureMode::Halt {
            self.halted = true;
        }
    }

    fn check_running(&mut self, rec: &mut LogRecord) {
        if let Some(i) = self.active {
            let action = self.timeline.plan.steps[i].action.clone();
            if let Some(m) = unmet_condition(&self.task, &action, &self.observed.atoms, true) {
                self.fail(rec, Some(i), m);
            }
        }
    }

    fn timeline_event(&mut self, e: TimedEvent) {
        let (exp0, obs0) = (self.expected.atoms.clone(), self.observed.atoms.clone());
        let kind = match e.kind {
            EventKind::TimedLiteral => RecordKind::TimedLiteral,
            EventKind::ActionStart => RecordKind::ActionStart,
            EventKind::ActionEnd => RecordKind::ActionEnd,
            EventKind::GoalCheck => RecordKind::GoalCheck,
            EventKind::Exogenous => RecordKind::Exogenous,
        };
        let mut rec = LogRecord::new(e.time, kind, self.plan_id);
        self.observed.time = self.observed.time.max(e.time);
        match (&e.payload, e.kind) {
            (Payload::Literal { .. }, _) => {
                let _ = apply_event(&self.task, &mut self.expected, &e);
                let _ = apply_event(&self.task, &mut self.observed, &e);
                self.check_running(&mut rec);
            }
            (Payload::Action { step, action }, EventKind::ActionStart) => {
                rec.action = Some(action.to_string());
                if let Some(m) = unmet_condition(&self.task, action, &self.observed.atoms, false) {
                    self.fail(&mut rec, Some(*step), m);
                }
                if !self.halted {
                    self.phase(&mut rec, *step, action, EffTime::AtStart, e.time);
                    self.active = Some(*step);
                    self.check_running(&mut rec);
                }
            }
            (Payload::Action { step, action }, _) => {
                rec.action = Some(action.to_string());
                self.phase(&mut rec, *step, action, EffTime::AtEnd, e.time);
                self.active = None;
                *self.completed.entry(action.predicate.clone()).or_default() += 1;
            }
            (Payload::Goals { atoms }, _) => {
                let unmet: Vec<Atom> = atoms.iter().filter(|g| !self.observed.atoms.contains(g)).cloned().collect();
                rec.unmet_goals = Some(unmet.clone());
                self.unmet = Some(unmet);
            }
        }
        rec.expected = Delta::between(&exp0, &self.expected.atoms);
        rec.observed = Delta::between(&obs0, &self.observed.atoms);
        self.push(rec);
        if e.kind == EventKind::ActionEnd {
            let pending = std::mem::take(&mut self.pending);
            for p in pending {
                self.opportunity(e.time, p);
            }
        }
    }

    fn phase(&mut self, rec: &mut LogRecord, step: usize, action: &Atom, when: EffTime, t: Minutes) {
        self.expected.time = t;
        if let Err(m) = apply_effects(&self.task, &mut self.expected, action, when) {
            rec.note = Some(m);
        }
        if let Err(m) = apply_effects(&self.task, &mut self.observed, action, when) {
            self.fail(rec, Some(step), m);
        }
    }

    fn exogenous(&mut self, x: &ScenarioEvent) {
        let now = x.time;
        self.expected.time = self.expected.time.max(now);
        self.observed.time = self.observed.time.max(now);
        let obs0 = self.observed.atoms.clone();
        for a in &x.retract {
            self.observed.atoms.remove(a);
        }
        for a in &x.assert {
            self.observed.atoms.insert(a.clone());
        }
        let d = discrepancies(&self.expected.atoms, &self.observed.atoms);
        let cls = classify(&d, &self.task, &self.timeline.plan, now);
        let fresh: Vec<Atom> = x.retract.iter().chain(&x.assert).filter(|a| d.contains(a)).cloned().collect();

        let mut rec = LogRecord::new(now, RecordKind::Exogenous, self.plan_id);
        rec.observed = Delta::between(&obs0, &self.observed.atoms);
        rec.classification = cls;
        rec.discrepancies = Some(d);
        self.check_running(&mut rec);
        self.push(rec);

        let p = Pending { fresh, facts: x.facts.clone() };
        if self.active.is_some() {
            self.pending.push(p);
        } else {
            self.opportunity(now, p);
        }
    }

    fn opportunity(&mut self, now: Minutes, p: Pending) {
        if self.halted {
            return;
        }
        let d = discrepancies(&self.expected.atoms, &self.observed.atoms);
        let cls = classify(&d, &self.task, &self.timeline.plan, now);
        let fresh: Vec<Atom> = p.fresh.into_iter().filter(|a| d.contains(a)).collect();
        if !fresh.iter().any(|a| cls.tag(a).is_some_and(|t| t.is_opportunity())) {
            return;
        }
        let remaining = Plan::new(self.timeline.plan.steps.iter().filter(|s| s.start >= now).cloned().collect());
        let started = Instant::now();
        let resp = self.hook.on_event(&EventContext {
            now,
            task: &self.task,
            plan: &remaining,
            observed: &self.observed,
            discrepancies: &d,
            classification: &cls,
            fresh: &fresh,
            facts: &p.facts,
        });
        let spent = started.elapsed().as_millis();
        self.hook_millis += spent;

        let mut rec = LogRecord::new(now, RecordKind::Opportunity, self.plan_id);
        rec.classification = cls;
        if let Some(r) = &resp.report {
            self.opportunities.push(r.clone());
        }
        rec.opportunity = resp.report;
        if let Some(rep) = resp.replacement {
            let shift = if self.cfg.charge_planning_time { spent.div_ceil(60_000) as Minutes } else { 0 };
            let plan =
                Plan::new(rep.plan.steps.iter().map(|s| PlanStep { start: s.start + shift, ..s.clone() }).collect());
            match build_timeline(&rep.task, &plan) {
                Ok(tl) => {
                    self.plan_id += 1;
                    self.plans.push(adopted(self.plan_id, now, &plan, &self.completed));
                    self.task = rep.task;
                    self.timeline = tl;
                    self.expected = self.observed.clone();
                    rec.adopted_plan = Some(self.plan_id);
                }
                Err(v) => rec.note = Some(format!("replacement plan rejected: {v}")),
            }
        }
        self.push(rec);
    }
}

/// Executes `timeline` for `task`, interleaving scenario events. Exogenous
/// events arriving while an action runs are handed to the hook when that
/// action ends.
pub fn run(
    task: &PlanningTask,
    timeline: Timeline,
    scenario: &Scenario,
    hook: &mut dyn Hook,
    cfg: &SimConfig,
) -> ExecutionLog {
    let state = initial_state(task);
    let first = adopted(0, state.time, &timeline.plan, &BTreeMap::new());
    let mut sim = Sim {
        task: task.clone(),
        timeline,
        plan_id: 0,
        expected: state.clone(),
        observed: state,
        active: None,
        failed_steps: BTreeSet::new(),
        pending: Vec::new(),
        records: Vec::new(),
        failures: Vec::new(),
        completed: BTreeMap::new(),
        plans: vec![first],
        opportunities: Vec::new(),
        unmet: None,
        halted: false,
        hook,
        cfg: *cfg,
        hook_millis: 0,
    };

    let mut xi = 0;
    while !sim.halted {
        let tl_key = sim.timeline.peek().map(|e| (e.time, e.kind.rank()));
        let x_key = scenario.events.get(xi).map(|x| (x.time, EventKind::Exogenous.rank()));
        match (tl_key, x_key) {
            (None, None) => break,
            (Some(t), Some(x)) if x < t => {
                xi += 1;
                sim.exogenous(&scenario.events[xi - 1]);
            }
            (None, Some(_)) => {
                xi += 1;
                sim.exogenous(&scenario.events[xi - 1]);
            }
            _ => {
                let e = sim.timeline.next_event().expect("peeked");
                sim.timeline_event(e);
            }
        }
    }

    let unmet = sim.unmet.clone().unwrap_or_else(|| {
        sim.task.instance.goals.iter().filter(|g| !sim.observed.atoms.contains(g)).cloned().collect()
    });
    let report = SimulationReport {
        plans: sim.plans,
        completed: sim.completed,
        goals_met: unmet.is_empty() && !sim.halted,
        unmet_goals: unmet,
        failures: sim.failures,
        opportunities: sim.opportunities,
        end_time: sim.observed.time,
        final_state: sim.observed,
    };
    ExecutionLog { records: sim.records, report, hook_millis: sim.hook_millis }
}
