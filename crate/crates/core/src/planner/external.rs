//! Adapter for an out-of-process PDDL planner.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use super::{validate, Planner, PlannerConfig, PlannerError, Solution, SolveOutcome};
use crate::task::{parse_plan, PlanningTask};

/// Runs `program args... <domain> <problem>` and reads the plan from stdout.
/// Lines that do not look like plan steps are ignored. A non-zero exit or an
/// empty plan for unmet goals counts as unsolvable.
#[derive(Debug, Clone)]
pub struct ExternalPlanner {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ExternalPlanner {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalPlanner { program: program.into(), args: Vec::new() }
    }
}

fn looks_like_step(line: &str) -> bool {
    let l = line.trim();
    l.split_once(':').is_some_and(|(t, rest)| t.trim().parse::<f64>().is_ok() && rest.trim_start().starts_with('('))
}

impl Planner for ExternalPlanner {
    fn solve(&self, task: &PlanningTask, _cfg: &PlannerConfig) -> Result<SolveOutcome, PlannerError> {
        let err = |m: String| PlannerError::External(m);
        let dir = tempfile::tempdir().map_err(|e| err(e.to_string()))?;
        let (d, p) = task.to_pddl();
        let dp = dir.path().join("domain.pddl");
        let pp = dir.path().join("problem.pddl");
        fs::write(&dp, d).map_err(|e| err(e.to_string()))?;
        fs::write(&pp, p).map_err(|e| err(e.to_string()))?;
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(&dp)
            .arg(&pp)
            .output()
            .map_err(|e| err(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            log::info!("external planner exited with {}", out.status);
            return Ok(SolveOutcome::Unsolvable);
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let text: String = stdout.lines().filter(|l| looks_like_step(l)).map(|l| format!("{l}\n")).collect();
        let plan = parse_plan(&text).map_err(|e| err(e.to_string()))?;
        let v = validate(&plan, task);
        match v.violation {
            Some(viol) if plan.is_empty() => {
                log::info!("external planner returned no plan: {viol}");
                Ok(SolveOutcome::Unsolvable)
            }
            Some(viol) => Err(PlannerError::InvalidPlan(viol)),
            None => Ok(SolveOutcome::Solved(Solution { plan, metric: v.metric.unwrap_or(f64::NAN) })),
        }
    }
}
