//! Planning task model: domain (types, predicates, functions, durative
//! actions) plus problem instance (objects, initial state, timed initial
//! literals, goals, metric, horizon).
//!
//! Times are whole minutes from midnight.

mod parse;
mod plan;
mod write;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sexpr::{Pos, SyntaxError};

pub use parse::{parse_atom, parse_domain, parse_problem};
pub use plan::{parse_plan, Plan, PlanStep};
pub use write::{write_domain, write_problem};

/// Name of the implicit universal root type.
pub const ROOT_TYPE: &str = "object";

/// Minutes from midnight.
pub type Minutes = i64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{pos}: unsupported construct `{what}`")]
    Unsupported { what: String, pos: Pos },
    #[error("undeclared type `{name}`{}", at(.pos))]
    UndeclaredType { name: String, pos: Option<Pos> },
    #[error("duplicate {kind} `{name}`{}", at(.pos))]
    Duplicate { kind: &'static str, name: String, pos: Option<Pos> },
    #[error("unknown predicate `{name}`{}", at(.pos))]
    UnknownPredicate { name: String, pos: Option<Pos> },
    #[error("unknown function `{name}`{}", at(.pos))]
    UnknownFunction { name: String, pos: Option<Pos> },
    #[error("unknown object `{name}`{}", at(.pos))]
    UnknownObject { name: String, pos: Option<Pos> },
    #[error("unknown parameter `{name}`{}", at(.pos))]
    UnknownParameter { name: String, pos: Option<Pos> },
    #[error("`{atom}`: {msg}{}", at(.pos))]
    BadAtom { atom: String, msg: String, pos: Option<Pos> },
    #[error("type hierarchy cycle through `{0}`")]
    TypeCycle(String),
    #[error("{0}")]
    Invalid(String),
}

fn at(pos: &Option<Pos>) -> String {
    pos.map(|p| format!(" at {p}")).unwrap_or_default()
}

/// Single-inheritance type hierarchy rooted at [`ROOT_TYPE`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeHierarchy {
    parents: BTreeMap<String, String>,
}

impl TypeHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, ty: &str) -> bool {
        ty == ROOT_TYPE || self.parents.contains_key(ty)
    }

    pub fn parent(&self, ty: &str) -> Option<&str> {
        self.parents.get(ty).map(String::as_str)
    }

    /// Declared (non-root) types and their parents, sorted by name.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// All type names including the root.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(ROOT_TYPE).chain(self.parents.keys().map(String::as_str))
    }

    pub fn len(&self) -> usize {
        self.parents.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn children<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.parents.iter().filter(move |(_, p)| p.as_str() == ty).map(|(k, _)| k.as_str())
    }

    /// Adds `name - parent`. The parent must exist and the name must be new,
    /// so ancestors of existing types never change.
    pub fn add(&mut self, name: &str, parent: &str) -> Result<(), TaskError> {
        if self.contains(name) {
            return Err(TaskError::Duplicate { kind: "type", name: name.into(), pos: None });
        }
        if !self.contains(parent) {
            return Err(TaskError::UndeclaredType { name: parent.into(), pos: None });
        }
        self.parents.insert(name.into(), parent.into());
        Ok(())
    }

    /// Builds from raw `(child, parent)` pairs in any order, checking that
    /// every parent is declared and there are no cycles.
    pub(crate) fn from_pairs(pairs: Vec<(String, String, Pos)>) -> Result<Self, TaskError> {
        let mut parents = BTreeMap::new();
        for (child, parent, pos) in &pairs {
            if child == ROOT_TYPE {
                if parent == ROOT_TYPE {
                    continue;
                }
                return Err(TaskError::Invalid(format!("{pos}: the root type `object` cannot have a parent")));
            }
            if parents.insert(child.clone(), parent.clone()).is_some() {
                return Err(TaskError::Duplicate { kind: "type", name: child.clone(), pos: Some(*pos) });
            }
        }
        // Parents mentioned only on the right of `-` are implicitly declared under the root.
        for (_, parent, _) in &pairs {
            if parent != ROOT_TYPE && !parents.contains_key(parent) {
                parents.insert(parent.clone(), ROOT_TYPE.to_string());
            }
        }
        let h = TypeHierarchy { parents };
        for name in h.parents.keys() {
            let mut cur = name.as_str();
            let mut steps = 0;
            while let Some(p) = h.parent(cur) {
                cur = p;
                steps += 1;
                if steps > h.parents.len() {
                    return Err(TaskError::TypeCycle(name.clone()));
                }
            }
        }
        Ok(h)
    }

    /// `ty` itself followed by its parent chain up to the root.
    pub fn ancestors(&self, ty: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = match self.parents.get_key_value(ty) {
            Some((k, _)) => k.as_str(),
            None if ty == ROOT_TYPE => ROOT_TYPE,
            None => return out,
        };
        loop {
            out.push(cur);
            match self.parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
        if out.last() != Some(&ROOT_TYPE) {
            out.push(ROOT_TYPE);
        }
        out
    }

    pub fn is_subtype(&self, ty: &str, of: &str) -> bool {
        of == ROOT_TYPE || self.ancestors(ty).contains(&of)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TypeExpr {
    Single(String),
    Either(Vec<String>),
}

impl TypeExpr {
    pub fn members(&self) -> &[String] {
        match self {
            TypeExpr::Single(t) => std::slice::from_ref(t),
            TypeExpr::Either(ts) => ts,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Single(t) => f.write_str(t),
            TypeExpr::Either(ts) => write!(f, "(either {})", ts.join(" ")),
        }
    }
}

/// True iff `obj_type` is the type, a descendant of it, or matches any member
/// of an either-set.
pub fn type_compatible(obj_type: &str, expr: &TypeExpr, types: &TypeHierarchy) -> Result<bool, TaskError> {
    if !types.contains(obj_type) {
        return Err(TaskError::UndeclaredType { name: obj_type.into(), pos: None });
    }
    for m in expr.members() {
        if !types.contains(m) {
            return Err(TaskError::UndeclaredType { name: m.clone(), pos: None });
        }
    }
    Ok(expr.members().iter().any(|m| types.is_subtype(obj_type, m)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
}

/// Shared shape of predicate and function declarations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<Param>,
}

pub type FunctionSchema = PredicateSchema;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Obj(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Obj(v) => f.write_str(v),
        }
    }
}

/// Predicate or fluent application with variables and/or objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    pub fn ground(&self, binding: &BTreeMap<&str, &str>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => binding.get(v.as_str()).map(|s| s.to_string()).unwrap_or_else(|| v.clone()),
                    Term::Obj(o) => o.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

/// Ground atom `(p o1 ... on)`; also used as the key of a ground fluent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: S, args: impl IntoIterator<Item = S>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }

    pub fn mentions(&self, object: &str) -> bool {
        self.args.iter().any(|a| a == object)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NumExpr {
    Num(f64),
    Fluent(AtomTemplate),
    Bin(BinOp, Box<NumExpr>, Box<NumExpr>),
    /// `(total-time)`; only meaningful in metrics.
    TotalTime,
}

impl NumExpr {
    /// Evaluates with variables bound by `binding`. `None` if a referenced
    /// fluent is undefined or the result is not finite.
    pub fn eval(&self, binding: &BTreeMap<&str, &str>, fluents: &BTreeMap<Atom, f64>, total_time: f64) -> Option<f64> {
        let v = match self {
            NumExpr::Num(n) => *n,
            NumExpr::Fluent(t) => *fluents.get(&t.ground(binding))?,
            NumExpr::TotalTime => total_time,
            NumExpr::Bin(op, a, b) => {
                let a = a.eval(binding, fluents, total_time)?;
                let b = b.eval(binding, fluents, total_time)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
        };
        v.is_finite().then_some(v)
    }

    pub(crate) fn fluents(&self, out: &mut Vec<AtomTemplate>) {
        match self {
            NumExpr::Fluent(t) => out.push(t.clone()),
            NumExpr::Bin(_, a, b) => {
                a.fluents(out);
                b.fluents(out);
            }
            NumExpr::Num(_) | NumExpr::TotalTime => {}
        }
    }
}

impl fmt::Display for NumExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumExpr::Num(n) => write!(f, "{}", fmt_num(*n)),
            NumExpr::Fluent(t) => write!(f, "{t}"),
            NumExpr::TotalTime => f.write_str("(total-time)"),
            NumExpr::Bin(op, a, b) => write!(f, "({} {a} {b})", op.symbol()),
        }
    }
}

pub(crate) fn fmt_num(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CondTime {
    AtStart,
    OverAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EffTime {
    AtStart,
    AtEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub when: CondTime,
    pub positive: bool,
    pub atom: AtomTemplate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EffectKind {
    Add(AtomTemplate),
    Delete(AtomTemplate),
    Increase(AtomTemplate, NumExpr),
    Decrease(AtomTemplate, NumExpr),
    Assign(AtomTemplate, NumExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub when: EffTime,
    pub kind: EffectKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub duration: NumExpr,
    pub conditions: Vec<Condition>,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeHierarchy,
    pub predicates: Vec<PredicateSchema>,
    pub functions: Vec<FunctionSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSchema> {
        self.functions.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Adds `name - parent` to the type hierarchy.
    pub fn add_type(&mut self, name: &str, parent: &str) -> Result<(), TaskError> {
        self.types.add(name, parent)
    }

    /// Predicates never touched by any action effect: their truth is set by
    /// the initial state, timed initial literals or the environment.
    pub fn static_predicates(&self) -> BTreeSet<&str> {
        let touched: BTreeSet<&str> = self
            .actions
            .iter()
            .flat_map(|a| a.effects.iter())
            .filter_map(|e| match &e.kind {
                EffectKind::Add(t) | EffectKind::Delete(t) => Some(t.predicate.as_str()),
                _ => None,
            })
            .collect();
        self.predicates.iter().map(|p| p.name.as_str()).filter(|p| !touched.contains(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub direction: Direction,
    pub expr: NumExpr,
}

impl Metric {
    pub fn total_time() -> Self {
        Metric { direction: Direction::Minimize, expr: NumExpr::TotalTime }
    }

    pub fn is_total_time(&self) -> bool {
        self.direction == Direction::Minimize && self.expr == NumExpr::TotalTime
    }

    /// True if `a` is strictly better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.direction {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub start: Minutes,
    pub end: Minutes,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon { start: 0, end: 24 * 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimedLiteral {
    pub time: Minutes,
    pub positive: bool,
    pub atom: Atom,
}

impl fmt::Display for TimedLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "(at {} {})", self.time, self.atom)
        } else {
            write!(f, "(at {} (not {}))", self.time, self.atom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub domain: String,
    /// Object name to type name.
    pub objects: BTreeMap<String, String>,
    /// True atoms; everything else is false.
    pub init: BTreeSet<Atom>,
    pub fluents: BTreeMap<Atom, f64>,
    /// Sorted by time; ties keep declaration order.
    pub tils: Vec<TimedLiteral>,
    pub goals: Vec<Atom>,
    pub metric: Option<Metric>,
    pub horizon: Option<Horizon>,
}

impl Instance {
    pub fn horizon(&self) -> Horizon {
        self.horizon.unwrap_or_default()
    }

    pub fn metric(&self) -> Metric {
        self.metric.clone().unwrap_or_else(Metric::total_time)
    }

    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects.get(name).map(String::as_str)
    }
}

/// A planning task: domain plus problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningTask {
    pub domain: Domain,
    pub instance: Instance,
}

impl PlanningTask {
    pub fn parse(domain_src: &str, problem_src: &str) -> Result<Self, TaskError> {
        let domain = parse_domain(domain_src)?;
        let instance = parse_problem(problem_src, &domain)?;
        Ok(PlanningTask { domain, instance })
    }

    pub fn add_type(&mut self, name: &str, parent: &str) -> Result<(), TaskError> {
        if self.instance.objects.contains_key(name) {
            return Err(TaskError::Duplicate { kind: "type", name: name.into(), pos: None });
        }
        self.domain.add_type(name, parent)
    }

    pub fn add_object(&mut self, name: &str, ty: &str) -> Result<(), TaskError> {
        if self.instance.objects.contains_key(name) {
            return Err(TaskError::Duplicate { kind: "object", name: name.into(), pos: None });
        }
        if !self.domain.types.contains(ty) {
            return Err(TaskError::UndeclaredType { name: ty.into(), pos: None });
        }
        self.instance.objects.insert(name.into(), ty.into());
        Ok(())
    }

    /// Checks that `atom` names a declared predicate and its arguments are
    /// declared objects of compatible types.
    pub fn check_atom(&self, atom: &Atom) -> Result<(), TaskError> {
        let schema = self
            .domain
            .predicate(&atom.predicate)
            .ok_or_else(|| TaskError::UnknownPredicate { name: atom.predicate.clone(), pos: None })?;
        check_args(atom, &schema.params, &self.instance.objects, &self.domain.types, None)
    }

    pub fn check_fluent(&self, atom: &Atom) -> Result<(), TaskError> {
        let schema = self
            .domain
            .function(&atom.predicate)
            .ok_or_else(|| TaskError::UnknownFunction { name: atom.predicate.clone(), pos: None })?;
        check_args(atom, &schema.params, &self.instance.objects, &self.domain.types, None)
    }

    /// Serializes back to PDDL source, `(domain, problem)`.
    pub fn to_pddl(&self) -> (String, String) {
        (write_domain(&self.domain), write_problem(&self.instance))
    }
}

pub(crate) fn check_args(
    atom: &Atom,
    params: &[Param],
    objects: &BTreeMap<String, String>,
    types: &TypeHierarchy,
    pos: Option<Pos>,
) -> Result<(), TaskError> {
    if atom.args.len() != params.len() {
        return Err(TaskError::BadAtom {
            atom: atom.to_string(),
            msg: format!("expected {} arguments, got {}", params.len(), atom.args.len()),
            pos,
        });
    }
    for (arg, param) in atom.args.iter().zip(params) {
        let ty = objects.get(arg).ok_or_else(|| TaskError::UnknownObject { name: arg.clone(), pos })?;
        if !type_compatible(ty, &param.ty, types)? {
            return Err(TaskError::BadAtom {
                atom: atom.to_string(),
                msg: format!("`{arg}` of type `{ty}` does not fit parameter {} - {}", param.name, param.ty),
                pos,
            });
        }
    }
    Ok(())
}
