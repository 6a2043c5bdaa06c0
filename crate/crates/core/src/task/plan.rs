use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Atom, Minutes, TaskError};
use crate::sexpr::{parse_all, Pos, SyntaxError};

/// One scheduled ground action. The action is stored as an atom whose
/// predicate is the action name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub start: Minutes,
    pub action: Atom,
    pub duration: Minutes,
}

impl PlanStep {
    pub fn end(&self) -> Minutes {
        self.start + self.duration
    }
}

/// Sequential plan: steps sorted by start time, no overlap.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Plan { steps }
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn end(&self) -> Option<Minutes> {
        self.steps.last().map(PlanStep::end)
    }

    /// Number of steps running the named action.
    pub fn count(&self, action: &str) -> usize {
        self.steps.iter().filter(|s| s.action.predicate == action).count()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{}: {} [{}]", s.start, s.action, s.duration)?;
        }
        Ok(())
    }
}

fn whole_minutes(text: &str, line: usize) -> Result<Minutes, TaskError> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| SyntaxError::new(Pos { line, col: 1 }, format!("expected a number, found `{}`", text.trim())))?;
    // External planners print e.g. `600.000`; allow tiny float noise.
    let r = v.round();
    if (v - r).abs() > 1e-3 {
        return Err(SyntaxError::new(
            Pos { line, col: 1 },
            format!("`{}` is not a whole number of minutes", text.trim()),
        )
        .into());
    }
    Ok(r as Minutes)
}

/// Parses `<start>: (<action> <args>) [<duration>]` lines. Blank lines and
/// `;` comments are skipped.
pub fn parse_plan(src: &str) -> Result<Plan, TaskError> {
    let mut steps = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| TaskError::Syntax(SyntaxError::new(Pos { line: line_no, col: 1 }, msg));
        let (start, rest) =
            line.split_once(':').ok_or_else(|| err("expected `<start>: (<action> ...) [<duration>]`"))?;
        let open = rest.find('(').ok_or_else(|| err("missing action"))?;
        let close = rest.rfind(')').ok_or_else(|| err("missing `)`"))?;
        let action_src = &rest[open..=close];
        let tail = rest[close + 1..].trim();
        let dur =
            tail.strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(|| err("missing `[<duration>]`"))?;
        let exprs = parse_all(action_src)
            .map_err(|e| TaskError::Syntax(SyntaxError::new(Pos { line: line_no, col: open + e.pos.col }, e.msg)))?;
        let items = match exprs.as_slice() {
            [e] => e.expect_list("action").map_err(|_| err("expected `(<action> <args>)`"))?,
            _ => return Err(err("expected a single action")),
        };
        let names = items
            .iter()
            .map(|x| x.as_atom().map(str::to_string).ok_or_else(|| err("nested list in action")))
            .collect::<Result<Vec<_>, _>>()?;
        let (name, args) = names.split_first().ok_or_else(|| err("empty action"))?;
        steps.push(PlanStep {
            start: whole_minutes(start, line_no)?,
            action: Atom { predicate: name.clone(), args: args.to_vec() },
            duration: whole_minutes(dur, line_no)?,
        });
    }
    steps.sort_by_key(|s| s.start);
    Ok(Plan { steps })
}
