//! Temporal planner for sequential durative actions with time windows.
//!
//! Actions run one at a time and each starts at the earliest moment its
//! conditions allow, waiting for timed initial literals if needed. The
//! optimal strategy is a depth-first branch-and-bound with time-dominance
//! pruning; the greedy strategy is best-first on unmet goals.

mod external;
mod ground;
mod search;
mod validate;

use serde::{Deserialize, Serialize};

use crate::task::{Plan, PlanningTask};

pub use external::ExternalPlanner;
pub use validate::{metric_value, validate, Validation, Violation, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Optimal,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub node_budget: u64,
    pub time_budget_ms: u64,
    pub strategy: Strategy,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { node_budget: 2_000_000, time_budget_ms: 20_000, strategy: Strategy::Optimal }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub expanded: u64,
    pub generated: u64,
    pub pruned_dominated: u64,
    pub pruned_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub plan: Plan,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveOutcome {
    Solved(Solution),
    Unsolvable,
    BudgetExhausted { best: Option<Solution> },
}

impl SolveOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SolveOutcome::Solved(s) => Some(s),
            SolveOutcome::BudgetExhausted { best } => best.as_ref(),
            SolveOutcome::Unsolvable => None,
        }
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.solution().map(|s| &s.plan)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("external planner: {0}")]
    External(String),
    #[error("returned plan is invalid: {0}")]
    InvalidPlan(Violation),
}

/// Anything that turns a task into a plan.
pub trait Planner: Send + Sync {
    fn solve(&self, task: &PlanningTask, cfg: &PlannerConfig) -> Result<SolveOutcome, PlannerError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinPlanner;

impl Planner for BuiltinPlanner {
    fn solve(&self, task: &PlanningTask, cfg: &PlannerConfig) -> Result<SolveOutcome, PlannerError> {
        Ok(solve(task, cfg))
    }
}

pub fn solve(task: &PlanningTask, cfg: &PlannerConfig) -> SolveOutcome {
    solve_with_stats(task, cfg).0
}

pub fn solve_with_stats(task: &PlanningTask, cfg: &PlannerConfig) -> (SolveOutcome, SearchStats) {
    let g = ground::ground(task);
    let h = task.instance.horizon();
    let metric = task.instance.metric();
    let searcher = search::Searcher::new(&g, h.start, h.end, metric.direction, metric.is_total_time(), *cfg);
    let (result, stats) = searcher.run();
    let outcome = match result {
        search::SearchResult::Found(plan, metric) => SolveOutcome::Solved(Solution { plan, metric }),
        search::SearchResult::Unsolvable => SolveOutcome::Unsolvable,
        search::SearchResult::Budget(best) => {
            SolveOutcome::BudgetExhausted { best: best.map(|(plan, metric)| Solution { plan, metric }) }
        }
    };
    log::debug!("search: {stats:?}");
    (outcome, stats)
}
