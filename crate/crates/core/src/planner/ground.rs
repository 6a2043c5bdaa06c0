//! Grounding of a task into indexed atoms, fluents and actions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::task::{
    type_compatible, ActionSchema, Atom, AtomTemplate, BinOp, CondTime, EffTime, EffectKind, Minutes, NumExpr,
    PlanningTask,
};

#[derive(Debug, Clone)]
pub(crate) enum GNum {
    Num(f64),
    Fluent(usize),
    Bin(BinOp, Box<GNum>, Box<GNum>),
    TotalTime,
}

impl GNum {
    pub(crate) fn eval(&self, fluents: &[f64], total_time: f64) -> Option<f64> {
        let v = match self {
            GNum::Num(n) => *n,
            GNum::Fluent(i) => fluents[*i],
            GNum::TotalTime => total_time,
            GNum::Bin(op, a, b) => {
                let (a, b) = (a.eval(fluents, total_time)?, b.eval(fluents, total_time)?);
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

    fn mentions_time(&self) -> bool {
        match self {
            GNum::TotalTime => true,
            GNum::Bin(_, a, b) => a.mentions_time() || b.mentions_time(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NumOp {
    Increase,
    Decrease,
    Assign,
}

#[derive(Debug, Clone)]
pub(crate) struct NumEffect {
    pub op: NumOp,
    pub fluent: usize,
    pub expr: GNum,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Phase {
    pub add: Vec<usize>,
    pub del: Vec<usize>,
    pub num: Vec<NumEffect>,
}

#[derive(Debug, Clone)]
pub(crate) struct GroundAction {
    pub atom: Atom,
    pub duration: GNum,
    pub start_pos: Vec<usize>,
    pub start_neg: Vec<usize>,
    pub over_pos: Vec<usize>,
    pub over_neg: Vec<usize>,
    pub at_start: Phase,
    pub at_end: Phase,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GroundTil {
    pub time: Minutes,
    pub positive: bool,
    pub atom: usize,
}

/// Whole-minute duration: rounded up, `None` if undefined or negative.
pub(crate) fn minutes(v: f64) -> Option<Minutes> {
    if v.is_nan() || v < 0.0 {
        return None;
    }
    Some((v - 1e-9).ceil().max(0.0) as Minutes)
}

#[derive(Debug, Clone)]
pub(crate) struct Grounded {
    pub atoms: Vec<Atom>,
    pub actions: Vec<GroundAction>,
    pub tils: Vec<GroundTil>,
    pub init: Vec<usize>,
    pub init_fluents: Vec<f64>,
    pub goals: Vec<usize>,
    /// Atoms touched by timed initial literals.
    pub til_mask: Vec<bool>,
    /// Timed literals never touch atoms that actions change, so a state's
    /// time-controlled part follows from its time alone.
    pub til_disjoint: bool,
    pub metric: GNum,
    pub metric_mentions_time: bool,
}

#[derive(Default)]
struct Index {
    atoms: Vec<Atom>,
    atom_ix: HashMap<Atom, usize>,
    fluents: Vec<Atom>,
    fluent_ix: HashMap<Atom, usize>,
}

impl Index {
    fn atom(&mut self, a: Atom) -> usize {
        if let Some(&i) = self.atom_ix.get(&a) {
            return i;
        }
        self.atoms.push(a.clone());
        self.atom_ix.insert(a, self.atoms.len() - 1);
        self.atoms.len() - 1
    }

    fn fluent(&mut self, a: Atom) -> usize {
        if let Some(&i) = self.fluent_ix.get(&a) {
            return i;
        }
        self.fluents.push(a.clone());
        self.fluent_ix.insert(a, self.fluents.len() - 1);
        self.fluents.len() - 1
    }

    fn num(&mut self, e: &NumExpr, b: &BTreeMap<&str, &str>) -> GNum {
        match e {
            NumExpr::Num(n) => GNum::Num(*n),
            NumExpr::TotalTime => GNum::TotalTime,
            NumExpr::Fluent(t) => GNum::Fluent(self.fluent(t.ground(b))),
            NumExpr::Bin(op, x, y) => GNum::Bin(*op, Box::new(self.num(x, b)), Box::new(self.num(y, b))),
        }
    }
}

fn bindings<'a>(task: &'a PlanningTask, schema: &'a ActionSchema) -> Vec<Vec<&'a str>> {
    let domains: Vec<Vec<&str>> = schema
        .params
        .iter()
        .map(|p| {
            task.instance
                .objects
                .iter()
                .filter(|(_, ty)| type_compatible(ty, &p.ty, &task.domain.types).unwrap_or(false))
                .map(|(o, _)| o.as_str())
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<&str>> = vec![Vec::new()];
    for d in &domains {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for prefix in &out {
            for o in d {
                let mut v = prefix.clone();
                v.push(*o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn ground(task: &PlanningTask) -> Grounded {
    let inst = &task.instance;
    let dom = &task.domain;
    let mut ix = Index::default();

    let til_preds: BTreeSet<&str> = inst.tils.iter().map(|t| t.atom.predicate.as_str()).collect();
    let fixed: BTreeSet<&str> = dom.static_predicates().into_iter().filter(|p| !til_preds.contains(p)).collect();
    let changed_fns: BTreeSet<&str> = dom
        .actions
        .iter()
        .flat_map(|a| &a.effects)
        .filter_map(|e| match &e.kind {
            EffectKind::Increase(t, _) | EffectKind::Decrease(t, _) | EffectKind::Assign(t, _) => {
                Some(t.predicate.as_str())
            }
            _ => None,
        })
        .collect();

    let mut actions = Vec::new();
    for schema in &dom.actions {
        'binding: for args in bindings(task, schema) {
            let b: BTreeMap<&str, &str> =
                schema.params.iter().map(|p| p.name.as_str()).zip(args.iter().copied()).collect();
            for c in &schema.conditions {
                if fixed.contains(c.atom.predicate.as_str()) && inst.init.contains(&c.atom.ground(&b)) != c.positive {
                    continue 'binding;
                }
            }
            let mut dur_fns = Vec::new();
            schema.duration.fluents(&mut dur_fns);
            if dur_fns.iter().all(|t| !changed_fns.contains(t.predicate.as_str())) {
                match schema.duration.eval(&b, &inst.fluents, 0.0).and_then(minutes) {
                    Some(_) => {}
                    None => continue 'binding,
                }
            }
            let mut ga = GroundAction {
                atom: Atom::new(schema.name.clone(), args.iter().map(|s| s.to_string())),
                duration: ix.num(&schema.duration, &b),
                start_pos: vec![],
                start_neg: vec![],
                over_pos: vec![],
                over_neg: vec![],
                at_start: Phase::default(),
                at_end: Phase::default(),
            };
            for c in &schema.conditions {
                if fixed.contains(c.atom.predicate.as_str()) {
                    continue;
                }
                let i = ix.atom(c.atom.ground(&b));
                match (c.when, c.positive) {
                    (CondTime::AtStart, true) => ga.start_pos.push(i),
                    (CondTime::AtStart, false) => ga.start_neg.push(i),
                    (CondTime::OverAll, true) => ga.over_pos.push(i),
                    (CondTime::OverAll, false) => ga.over_neg.push(i),
                }
            }
            for e in &schema.effects {
                let phase = match e.when {
                    EffTime::AtStart => &mut ga.at_start,
                    EffTime::AtEnd => &mut ga.at_end,
                };
                let numeric = |op, t: &AtomTemplate, x: &NumExpr, ix: &mut Index| NumEffect {
                    op,
                    fluent: ix.fluent(t.ground(&b)),
                    expr: ix.num(x, &b),
                };
                match &e.kind {
                    EffectKind::Add(t) => phase.add.push(ix.atom(t.ground(&b))),
                    EffectKind::Delete(t) => phase.del.push(ix.atom(t.ground(&b))),
                    EffectKind::Increase(t, x) => phase.num.push(numeric(NumOp::Increase, t, x, &mut ix)),
                    EffectKind::Decrease(t, x) => phase.num.push(numeric(NumOp::Decrease, t, x, &mut ix)),
                    EffectKind::Assign(t, x) => phase.num.push(numeric(NumOp::Assign, t, x, &mut ix)),
                }
            }
            actions.push(ga);
        }
    }
    actions.sort_by(|a, b| a.atom.cmp(&b.atom));

    let init: Vec<usize> = inst.init.iter().map(|a| ix.atom(a.clone())).collect();
    let goals: Vec<usize> = inst.goals.iter().map(|a| ix.atom(a.clone())).collect();
    let tils: Vec<GroundTil> = inst
        .tils
        .iter()
        .map(|t| GroundTil { time: t.time, positive: t.positive, atom: ix.atom(t.atom.clone()) })
        .collect();
    for f in inst.fluents.keys() {
        ix.fluent(f.clone());
    }
    let metric_expr = inst.metric().expr;
    let metric = ix.num(&metric_expr, &BTreeMap::new());

    let init_fluents: Vec<f64> = ix.fluents.iter().map(|a| inst.fluents.get(a).copied().unwrap_or(f64::NAN)).collect();
    let mut til_mask = vec![false; ix.atoms.len()];
    for t in &tils {
        til_mask[t.atom] = true;
    }
    let til_disjoint = actions
        .iter()
        .all(|a| [&a.at_start, &a.at_end].iter().all(|p| p.add.iter().chain(&p.del).all(|&i| !til_mask[i])))
        && goals.iter().all(|&g| !til_mask[g]);

    Grounded {
        metric_mentions_time: metric.mentions_time(),
        atoms: ix.atoms,
        actions,
        tils,
        init,
        init_fluents,
        goals,
        til_mask,
        til_disjoint,
        metric,
    }
}
