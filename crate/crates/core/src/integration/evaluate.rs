use serde::Serialize;

use super::CandidateGoal;
use crate::par::{self, Execution};
use crate::planner::{validate, Planner, PlannerConfig, SolveOutcome};
use crate::task::{Plan, PlanningTask};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpportunityDecision {
    pub candidate: CandidateGoal,
    #[serde(skip)]
    pub variant: PlanningTask,
    #[serde(serialize_with = "ser_plan")]
    pub plan: Option<Plan>,
    pub metric_value: Option<f64>,
    #[serde(flatten)]
    pub verdict: Verdict,
}

fn ser_plan<S: serde::Serializer>(p: &Option<Plan>, s: S) -> Result<S::Ok, S::Error> {
    match p {
        None => s.serialize_none(),
        Some(p) => s.collect_seq(p.steps.iter().map(|st| format!("{}: {} [{}]", st.start, st.action, st.duration))),
    }
}

impl OpportunityDecision {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub decisions: Vec<OpportunityDecision>,
    /// Index of the accepted decision with the best metric.
    pub winner: Option<usize>,
}

impl Evaluation {
    pub fn best(&self) -> Option<&OpportunityDecision> {
        self.winner.map(|i| &self.decisions[i])
    }
}

fn decide(
    task: &PlanningTask,
    cand: &CandidateGoal,
    planner: &dyn Planner,
    cfg: &PlannerConfig,
) -> OpportunityDecision {
    let mut variant = task.clone();
    variant.instance.goals.push(cand.atom.clone());
    let rejected = |variant, plan, reason: String| OpportunityDecision {
        candidate: cand.clone(),
        variant,
        plan,
        metric_value: None,
        verdict: Verdict::Rejected(reason),
    };
    let solution = match planner.solve(&variant, cfg) {
        Err(e) => return rejected(variant, None, e.to_string()),
        Ok(SolveOutcome::Unsolvable) => return rejected(variant, None, "unsolvable".into()),
        Ok(SolveOutcome::BudgetExhausted { .. }) => return rejected(variant, None, "budget".into()),
        Ok(SolveOutcome::Solved(s)) => s,
    };
    let v = validate(&solution.plan, &variant);
    if let Some(viol) = v.violation {
        return rejected(variant, Some(solution.plan), format!("plan does not validate: {viol}"));
    }
    OpportunityDecision {
        candidate: cand.clone(),
        variant,
        plan: Some(solution.plan),
        metric_value: Some(solution.metric),
        verdict: Verdict::Accepted,
    }
}

/// Plans one variant per candidate (the task's goals plus that candidate)
/// and picks the accepted variant with the best metric; ties go to the
/// smaller candidate atom. `task` should already start at the current state.
pub fn evaluate_opportunities(
    task: &PlanningTask,
    candidates: &[CandidateGoal],
    planner: &dyn Planner,
    cfg: &PlannerConfig,
    exec: Execution,
) -> Evaluation {
    let decisions = par::map(exec, candidates, |c| decide(task, c, planner, cfg));
    let metric = task.instance.metric();
    let mut winner: Option<usize> = None;
    for (i, d) in decisions.iter().enumerate() {
        let Some(v) = d.metric_value.filter(|_| d.accepted()) else {
            continue;
        };
        winner = match winner {
            None => Some(i),
            Some(w) => {
                let wv = decisions[w].metric_value.expect("winner has a metric");
                let better = metric.better(v, wv) || (v == wv && d.candidate.atom < decisions[w].candidate.atom);
                Some(if better { i } else { w })
            }
        };
    }
    Evaluation { decisions, winner }
}
