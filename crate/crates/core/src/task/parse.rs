use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::sexpr::{parse_all, Sexpr};

const KNOWN_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":durative-actions",
    ":timed-initial-literals",
    ":fluents",
    ":numeric-fluents",
    ":action-costs",
];

fn unsupported(e: &Sexpr, what: impl Into<String>) -> TaskError {
    TaskError::Unsupported { what: what.into(), pos: e.pos() }
}

fn syntax(e: &Sexpr, msg: impl Into<String>) -> TaskError {
    TaskError::Syntax(SyntaxError::new(e.pos(), msg))
}

/// Splits `(define (<kind> NAME) sections...)`.
fn define_block<'a>(src: &'a [Sexpr], kind: &str) -> Result<(String, &'a [Sexpr]), TaskError> {
    let top = match src {
        [one] => one,
        [] => return Err(TaskError::Syntax(SyntaxError::new(Pos { line: 1, col: 1 }, "empty input"))),
        [_, extra, ..] => return Err(syntax(extra, "unexpected expression after `define` block")),
    };
    let items = top.expect_list("`(define ...)`")?;
    match items.first().and_then(Sexpr::as_atom) {
        Some(h) if h.eq_ignore_ascii_case("define") => {}
        _ => return Err(syntax(top, "expected `(define ...)`")),
    }
    let header = items.get(1).ok_or_else(|| syntax(top, format!("missing `({kind} NAME)`")))?;
    let h = header.expect_list("header")?;
    match (h.first().and_then(Sexpr::as_atom), h.get(1).and_then(Sexpr::as_atom), h.len()) {
        (Some(k), Some(name), 2) if k.eq_ignore_ascii_case(kind) => Ok((name.to_string(), &items[2..])),
        _ => Err(syntax(header, format!("expected `({kind} NAME)`"))),
    }
}

/// Parses `a b - t c - (either x y) d` into `(name, type, pos)` triples.
/// Names without a type get `object`.
fn typed_list(items: &[Sexpr]) -> Result<Vec<(String, TypeExpr, Pos)>, TaskError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        match item.as_atom() {
            Some("-") => {
                let ty_expr = items.get(i + 1).ok_or_else(|| syntax(item, "missing type after `-`"))?;
                let ty = type_expr(ty_expr)?;
                if pending.is_empty() {
                    return Err(syntax(item, "`-` without preceding names"));
                }
                for (n, p) in pending.drain(..) {
                    out.push((n, ty.clone(), p));
                }
                i += 2;
            }
            Some(name) => {
                pending.push((name.to_string(), item.pos()));
                i += 1;
            }
            None => return Err(syntax(item, "expected a name in typed list")),
        }
    }
    for (n, p) in pending {
        out.push((n, TypeExpr::Single(ROOT_TYPE.into()), p));
    }
    Ok(out)
}

fn type_expr(e: &Sexpr) -> Result<TypeExpr, TaskError> {
    match e {
        Sexpr::Atom(t, _) => Ok(TypeExpr::Single(t.clone())),
        Sexpr::List(items, _) => {
            if e.head().as_deref() != Some("either") {
                return Err(unsupported(e, "type expression other than `either`"));
            }
            let members = items[1..]
                .iter()
                .map(|m| m.expect_atom("type name").map(str::to_string))
                .collect::<Result<Vec<_>, _>>()?;
            if members.is_empty() {
                return Err(syntax(e, "empty `either`"));
            }
            Ok(TypeExpr::Either(members))
        }
    }
}

fn check_type_expr(ty: &TypeExpr, types: &TypeHierarchy, pos: Pos) -> Result<(), TaskError> {
    for m in ty.members() {
        if !types.contains(m) {
            return Err(TaskError::UndeclaredType { name: m.clone(), pos: Some(pos) });
        }
    }
    Ok(())
}

fn schema_list(block: &[Sexpr], types: &TypeHierarchy, kind: &'static str) -> Result<Vec<PredicateSchema>, TaskError> {
    let mut out: Vec<PredicateSchema> = Vec::new();
    let mut i = 0;
    while i < block.len() {
        let decl = &block[i];
        // `(:functions (f ?x) - number)` style return type.
        if kind == "function" && decl.as_atom() == Some("-") {
            match block.get(i + 1).and_then(Sexpr::as_atom) {
                Some("number") => {
                    i += 2;
                    continue;
                }
                _ => return Err(unsupported(decl, "function return type other than `number`")),
            }
        }
        let items = decl.expect_list(kind)?;
        let name = items
            .first()
            .ok_or_else(|| syntax(decl, format!("empty {kind} declaration")))?
            .expect_atom(&format!("{kind} name"))?;
        if out.iter().any(|p| p.name == name) {
            return Err(TaskError::Duplicate { kind, name: name.into(), pos: Some(decl.pos()) });
        }
        let params = params(&items[1..], types)?;
        out.push(PredicateSchema { name: name.into(), params });
        i += 1;
    }
    Ok(out)
}

fn params(items: &[Sexpr], types: &TypeHierarchy) -> Result<Vec<Param>, TaskError> {
    let mut out: Vec<Param> = Vec::new();
    for (name, ty, pos) in typed_list(items)? {
        if !name.starts_with('?') {
            return Err(TaskError::Syntax(SyntaxError::new(pos, format!("parameter `{name}` must start with `?`"))));
        }
        if out.iter().any(|p| p.name == name) {
            return Err(TaskError::Duplicate { kind: "parameter", name, pos: Some(pos) });
        }
        check_type_expr(&ty, types, pos)?;
        out.push(Param { name, ty });
    }
    Ok(out)
}

struct ActionCtx<'a> {
    types: &'a TypeHierarchy,
    predicates: &'a [PredicateSchema],
    functions: &'a [FunctionSchema],
    params: &'a [Param],
}

impl ActionCtx<'_> {
    fn template(&self, e: &Sexpr, schemas: &[PredicateSchema], kind: &str) -> Result<AtomTemplate, TaskError> {
        let items = e.expect_list(kind)?;
        let name = items.first().ok_or_else(|| syntax(e, format!("empty {kind}")))?.expect_atom(kind)?;
        let schema = schemas.iter().find(|p| p.name == name).ok_or_else(|| {
            if kind == "fluent" {
                TaskError::UnknownFunction { name: name.into(), pos: Some(e.pos()) }
            } else {
                TaskError::UnknownPredicate { name: name.into(), pos: Some(e.pos()) }
            }
        })?;
        if items.len() - 1 != schema.params.len() {
            return Err(TaskError::BadAtom {
                atom: name.into(),
                msg: format!("expected {} arguments, got {}", schema.params.len(), items.len() - 1),
                pos: Some(e.pos()),
            });
        }
        let mut args = Vec::new();
        for (arg, sp) in items[1..].iter().zip(&schema.params) {
            let a = arg.expect_atom("argument")?;
            if !a.starts_with('?') {
                return Err(unsupported(arg, format!("constant `{a}` in action schema")));
            }
            let p = self
                .params
                .iter()
                .find(|p| p.name == a)
                .ok_or_else(|| TaskError::UnknownParameter { name: a.into(), pos: Some(arg.pos()) })?;
            // Compatible if any member of the parameter type fits the slot.
            let mut ok = false;
            for m in p.ty.members() {
                ok |= type_compatible(m, &sp.ty, self.types)?;
            }
            if !ok {
                return Err(TaskError::BadAtom {
                    atom: format!("({name} ...)"),
                    msg: format!("parameter {a} - {} cannot fill slot {} - {}", p.ty, sp.name, sp.ty),
                    pos: Some(arg.pos()),
                });
            }
            args.push(Term::Var(a.into()));
        }
        Ok(AtomTemplate { predicate: name.into(), args })
    }

    fn num_expr(&self, e: &Sexpr) -> Result<NumExpr, TaskError> {
        match e {
            Sexpr::Atom(a, _) => {
                a.parse::<f64>().map(NumExpr::Num).map_err(|_| syntax(e, format!("expected a number, found `{a}`")))
            }
            Sexpr::List(items, _) => {
                let head = e.head().ok_or_else(|| syntax(e, "empty numeric expression"))?;
                let op = match head.as_str() {
                    "+" => Some(BinOp::Add),
                    "-" => Some(BinOp::Sub),
                    "*" => Some(BinOp::Mul),
                    "/" => Some(BinOp::Div),
                    _ => None,
                };
                match op {
                    Some(BinOp::Sub) if items.len() == 2 => {
                        Ok(NumExpr::Bin(BinOp::Sub, Box::new(NumExpr::Num(0.0)), Box::new(self.num_expr(&items[1])?)))
                    }
                    Some(op) if items.len() == 3 => {
                        Ok(NumExpr::Bin(op, Box::new(self.num_expr(&items[1])?), Box::new(self.num_expr(&items[2])?)))
                    }
                    Some(_) => Err(syntax(e, "arithmetic operators take two operands")),
                    None => Ok(NumExpr::Fluent(self.template(e, self.functions, "fluent")?)),
                }
            }
        }
    }

    fn literal(&self, e: &Sexpr) -> Result<(bool, AtomTemplate), TaskError> {
        if e.head().as_deref() == Some("not") {
            let items = e.as_list().unwrap_or_default();
            if items.len() != 2 {
                return Err(syntax(e, "`not` takes one atom"));
            }
            Ok((false, self.template(&items[1], self.predicates, "atom")?))
        } else {
            Ok((true, self.template(e, self.predicates, "atom")?))
        }
    }

    fn conditions(&self, e: &Sexpr, out: &mut Vec<Condition>) -> Result<(), TaskError> {
        let items = e.expect_list("condition")?;
        if items.is_empty() {
            return Ok(());
        }
        match e.head().as_deref() {
            Some("and") => {
                for c in &items[1..] {
                    self.conditions(c, out)?;
                }
                Ok(())
            }
            Some("at") => {
                let when = match (items.get(1).and_then(Sexpr::as_atom), items.len()) {
                    (Some(w), 3) if w.eq_ignore_ascii_case("start") => CondTime::AtStart,
                    (Some(w), 3) if w.eq_ignore_ascii_case("end") => {
                        return Err(unsupported(e, "`at end` condition"));
                    }
                    _ => return Err(syntax(e, "expected `(at start <literal>)`")),
                };
                let (positive, atom) = self.literal(&items[2])?;
                out.push(Condition { when, positive, atom });
                Ok(())
            }
            Some("over") => {
                match (items.get(1).and_then(Sexpr::as_atom), items.len()) {
                    (Some(w), 3) if w.eq_ignore_ascii_case("all") => {}
                    _ => return Err(syntax(e, "expected `(over all <literal>)`")),
                }
                let (positive, atom) = self.literal(&items[2])?;
                out.push(Condition { when: CondTime::OverAll, positive, atom });
                Ok(())
            }
            Some(other) => {
                Err(unsupported(e, format!("condition `{other}` (conditions must be time-tagged literals)")))
            }
            None => Err(syntax(e, "malformed condition")),
        }
    }

    fn effects(&self, e: &Sexpr, out: &mut Vec<Effect>) -> Result<(), TaskError> {
        let items = e.expect_list("effect")?;
        if items.is_empty() {
            return Ok(());
        }
        match e.head().as_deref() {
            Some("and") => {
                for c in &items[1..] {
                    self.effects(c, out)?;
                }
                Ok(())
            }
            Some("at") => {
                let when = match (items.get(1).and_then(Sexpr::as_atom), items.len()) {
                    (Some(w), 3) if w.eq_ignore_ascii_case("start") => EffTime::AtStart,
                    (Some(w), 3) if w.eq_ignore_ascii_case("end") => EffTime::AtEnd,
                    _ => return Err(syntax(e, "expected `(at start|end <effect>)`")),
                };
                let body = &items[2];
                let kind = match body.head().as_deref() {
                    Some(op @ ("increase" | "decrease" | "assign")) => {
                        let b = body.as_list().unwrap_or_default();
                        if b.len() != 3 {
                            return Err(syntax(body, format!("`{op}` takes a fluent and an expression")));
                        }
                        let f = self.template(&b[1], self.functions, "fluent")?;
                        let v = self.num_expr(&b[2])?;
                        match op {
                            "increase" => EffectKind::Increase(f, v),
                            "decrease" => EffectKind::Decrease(f, v),
                            _ => EffectKind::Assign(f, v),
                        }
                    }
                    Some("forall" | "when" | "scale-up" | "scale-down") => {
                        return Err(unsupported(body, body.head().unwrap_or_default()));
                    }
                    _ => match self.literal(body)? {
                        (true, a) => EffectKind::Add(a),
                        (false, a) => EffectKind::Delete(a),
                    },
                };
                out.push(Effect { when, kind });
                Ok(())
            }
            Some(other) => Err(unsupported(e, format!("effect `{other}` (effects must be `at start`/`at end`)"))),
            None => Err(syntax(e, "malformed effect")),
        }
    }
}

fn durative_action(
    e: &Sexpr,
    types: &TypeHierarchy,
    predicates: &[PredicateSchema],
    functions: &[FunctionSchema],
) -> Result<ActionSchema, TaskError> {
    let items = e.expect_list("durative action")?;
    let name = items.get(1).ok_or_else(|| syntax(e, "missing action name"))?.expect_atom("action name")?;
    let mut fields: BTreeMap<String, &Sexpr> = BTreeMap::new();
    let mut i = 2;
    while i < items.len() {
        let key = items[i].expect_atom("action field keyword")?.to_ascii_lowercase();
        if !matches!(key.as_str(), ":parameters" | ":duration" | ":condition" | ":effect") {
            return Err(unsupported(&items[i], key));
        }
        let val = items.get(i + 1).ok_or_else(|| syntax(&items[i], format!("missing value for {key}")))?;
        if fields.insert(key.clone(), val).is_some() {
            return Err(TaskError::Duplicate { kind: "action field", name: key, pos: Some(items[i].pos()) });
        }
        i += 2;
    }
    let params = match fields.get(":parameters") {
        Some(p) => params(p.expect_list("parameter list")?, types)?,
        None => Vec::new(),
    };
    let ctx = ActionCtx { types, predicates, functions, params: &params };
    let dur = fields.get(":duration").ok_or_else(|| syntax(e, format!("action `{name}` has no :duration")))?;
    let d = dur.expect_list("duration constraint")?;
    let duration = match (d.first().and_then(Sexpr::as_atom), d.get(1).and_then(Sexpr::as_atom), d.len()) {
        (Some("="), Some("?duration"), 3) => ctx.num_expr(&d[2])?,
        _ => return Err(unsupported(dur, "duration constraint other than `(= ?duration <expr>)`")),
    };
    let mut conditions = Vec::new();
    if let Some(c) = fields.get(":condition") {
        ctx.conditions(c, &mut conditions)?;
    }
    let mut effects = Vec::new();
    if let Some(c) = fields.get(":effect") {
        ctx.effects(c, &mut effects)?;
    }
    Ok(ActionSchema { name: name.into(), params, duration, conditions, effects })
}

/// Parses a domain in the supported PDDL subset.
pub fn parse_domain(src: &str) -> Result<Domain, TaskError> {
    let exprs = parse_all(src)?;
    let (name, sections) = define_block(&exprs, "domain")?;
    let mut requirements = Vec::new();
    let mut types_raw: Option<&[Sexpr]> = None;
    let mut preds_raw: Option<&[Sexpr]> = None;
    let mut funcs_raw: Option<&[Sexpr]> = None;
    let mut actions_raw = Vec::new();
    let mut seen = BTreeSet::new();
    for s in sections {
        let items = s.expect_list("domain section")?;
        let head = s.head().ok_or_else(|| syntax(s, "empty section"))?;
        if head != ":durative-action" && !seen.insert(head.clone()) {
            return Err(TaskError::Duplicate { kind: "section", name: head, pos: Some(s.pos()) });
        }
        match head.as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    let r = r.expect_atom("requirement")?;
                    if !KNOWN_REQUIREMENTS.contains(&r.to_ascii_lowercase().as_str()) {
                        return Err(unsupported(s, format!("requirement {r}")));
                    }
                    requirements.push(r.to_ascii_lowercase());
                }
            }
            ":types" => types_raw = Some(&items[1..]),
            ":predicates" => preds_raw = Some(&items[1..]),
            ":functions" => funcs_raw = Some(&items[1..]),
            ":durative-action" => actions_raw.push(s),
            _ => return Err(unsupported(s, head)),
        }
    }
    let mut pairs = Vec::new();
    if let Some(t) = types_raw {
        for (child, parent, pos) in typed_list(t)? {
            match parent {
                TypeExpr::Single(p) => pairs.push((child, p, pos)),
                TypeExpr::Either(_) => {
                    return Err(TaskError::Unsupported { what: "`either` as a supertype".into(), pos });
                }
            }
        }
    }
    let types = TypeHierarchy::from_pairs(pairs)?;
    let predicates = match preds_raw {
        Some(p) => schema_list(p, &types, "predicate")?,
        None => Vec::new(),
    };
    let functions = match funcs_raw {
        Some(p) => schema_list(p, &types, "function")?,
        None => Vec::new(),
    };
    let mut actions: Vec<ActionSchema> = Vec::new();
    for a in actions_raw {
        let act = durative_action(a, &types, &predicates, &functions)?;
        if actions.iter().any(|x| x.name == act.name) {
            return Err(TaskError::Duplicate { kind: "action", name: act.name, pos: Some(a.pos()) });
        }
        actions.push(act);
    }
    Ok(Domain { name, requirements, types, predicates, functions, actions })
}

fn ground_atom(e: &Sexpr) -> Result<Atom, TaskError> {
    let items = e.expect_list("ground atom")?;
    let pred = items.first().ok_or_else(|| syntax(e, "empty atom"))?.expect_atom("predicate")?;
    let args = items[1..]
        .iter()
        .map(|a| {
            let s = a.expect_atom("object name")?;
            if s.starts_with('?') {
                Err(syntax(a, format!("variable `{s}` in ground atom")))
            } else {
                Ok(s.to_string())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Atom { predicate: pred.into(), args })
}

fn ground_literal(e: &Sexpr) -> Result<(bool, Atom), TaskError> {
    if e.head().as_deref() == Some("not") {
        let items = e.as_list().unwrap_or_default();
        if items.len() != 2 {
            return Err(syntax(e, "`not` takes one atom"));
        }
        Ok((false, ground_atom(&items[1])?))
    } else {
        Ok((true, ground_atom(e)?))
    }
}

/// Parses a textual ground atom such as `(open Virgen_plaza)`.
pub fn parse_atom(src: &str) -> Result<Atom, TaskError> {
    let exprs = parse_all(src)?;
    match exprs.as_slice() {
        [e] => ground_atom(e),
        _ => Err(TaskError::Invalid(format!("expected exactly one atom in `{src}`"))),
    }
}

fn minutes(e: &Sexpr) -> Result<Minutes, TaskError> {
    let s = e.expect_atom("time")?;
    let v: f64 = s.parse().map_err(|_| syntax(e, format!("expected a time in minutes, found `{s}`")))?;
    if v.fract() != 0.0 {
        return Err(syntax(e, "times must be whole minutes"));
    }
    Ok(v as Minutes)
}

fn ground_num(e: &Sexpr) -> Result<NumExpr, TaskError> {
    match e {
        Sexpr::Atom(a, _) => {
            a.parse::<f64>().map(NumExpr::Num).map_err(|_| syntax(e, format!("expected a number, found `{a}`")))
        }
        Sexpr::List(items, _) => {
            let head = e.head().ok_or_else(|| syntax(e, "empty expression"))?;
            let op = match head.as_str() {
                "+" => BinOp::Add,
                "-" => BinOp::Sub,
                "*" => BinOp::Mul,
                "/" => BinOp::Div,
                "total-time" if items.len() == 1 => return Ok(NumExpr::TotalTime),
                _ => {
                    let a = ground_atom(e)?;
                    return Ok(NumExpr::Fluent(AtomTemplate {
                        predicate: a.predicate,
                        args: a.args.into_iter().map(Term::Obj).collect(),
                    }));
                }
            };
            if items.len() != 3 {
                return Err(syntax(e, "arithmetic operators take two operands"));
            }
            Ok(NumExpr::Bin(op, Box::new(ground_num(&items[1])?), Box::new(ground_num(&items[2])?)))
        }
    }
}

/// Parses a problem against an already parsed domain and validates it.
pub fn parse_problem(src: &str, domain: &Domain) -> Result<Instance, TaskError> {
    let exprs = parse_all(src)?;
    let (name, sections) = define_block(&exprs, "problem")?;
    let mut domain_name = None;
    let mut objects = BTreeMap::new();
    let mut init = BTreeSet::new();
    let mut fluents = BTreeMap::new();
    let mut tils: Vec<(TimedLiteral, Pos)> = Vec::new();
    let mut goals: Vec<(Atom, Pos)> = Vec::new();
    let mut metric = None;
    let mut horizon = None;
    let mut init_atoms: Vec<(Atom, Pos)> = Vec::new();
    let mut init_fluents: Vec<(Atom, Pos)> = Vec::new();
    let mut seen = BTreeSet::new();

    for s in sections {
        let items = s.expect_list("problem section")?;
        let head = s.head().ok_or_else(|| syntax(s, "empty section"))?;
        if !seen.insert(head.clone()) {
            return Err(TaskError::Duplicate { kind: "section", name: head, pos: Some(s.pos()) });
        }
        match head.as_str() {
            ":domain" => {
                let d = items.get(1).ok_or_else(|| syntax(s, "missing domain name"))?.expect_atom("domain name")?;
                if d != domain.name {
                    return Err(TaskError::Invalid(format!(
                        "{}: problem is for domain `{d}`, not `{}`",
                        s.pos(),
                        domain.name
                    )));
                }
                domain_name = Some(d.to_string());
            }
            ":objects" => {
                for (obj, ty, pos) in typed_list(&items[1..])? {
                    let ty = match ty {
                        TypeExpr::Single(t) => t,
                        TypeExpr::Either(_) => {
                            return Err(TaskError::Unsupported { what: "`either` as an object type".into(), pos });
                        }
                    };
                    if !domain.types.contains(&ty) {
                        return Err(TaskError::UndeclaredType { name: ty, pos: Some(pos) });
                    }
                    if objects.insert(obj.clone(), ty).is_some() {
                        return Err(TaskError::Duplicate { kind: "object", name: obj, pos: Some(pos) });
                    }
                }
            }
            ":init" => {
                for e in &items[1..] {
                    match e.head().as_deref() {
                        Some("=") => {
                            let f = e.as_list().unwrap_or_default();
                            if f.len() != 3 {
                                return Err(syntax(e, "expected `(= (f args) value)`"));
                            }
                            let key = ground_atom(&f[1])?;
                            let v = f[2].expect_atom("number")?;
                            let v: f64 =
                                v.parse().map_err(|_| syntax(&f[2], format!("expected a number, found `{v}`")))?;
                            if fluents.insert(key.clone(), v).is_some() {
                                return Err(TaskError::Duplicate {
                                    kind: "fluent",
                                    name: key.to_string(),
                                    pos: Some(e.pos()),
                                });
                            }
                            init_fluents.push((key, e.pos()));
                        }
                        Some("at") if e.as_list().map(|l| l.len()) == Some(3) => {
                            let l = e.as_list().unwrap_or_default();
                            let time = minutes(&l[1])?;
                            let (positive, atom) = ground_literal(&l[2])?;
                            tils.push((TimedLiteral { time, positive, atom }, e.pos()));
                        }
                        Some("not") => return Err(unsupported(e, "negative literal in :init (closed world)")),
                        _ => {
                            let a = ground_atom(e)?;
                            init_atoms.push((a.clone(), e.pos()));
                            init.insert(a);
                        }
                    }
                }
            }
            ":goal" => {
                let g = items.get(1).ok_or_else(|| syntax(s, "missing goal"))?;
                if items.len() > 2 {
                    return Err(syntax(&items[2], "`:goal` takes a single expression"));
                }
                let list: Vec<&Sexpr> = if g.as_list().is_some_and(|l| l.is_empty()) {
                    Vec::new()
                } else if g.head().as_deref() == Some("and") {
                    g.as_list().unwrap_or_default()[1..].iter().collect()
                } else {
                    vec![g]
                };
                for e in list {
                    if e.head().as_deref() == Some("not") {
                        return Err(unsupported(e, "negative goal"));
                    }
                    let a = ground_atom(e)?;
                    if !goals.iter().any(|(x, _)| *x == a) {
                        goals.push((a, e.pos()));
                    }
                }
            }
            ":metric" => {
                let dir = items.get(1).ok_or_else(|| syntax(s, "missing metric direction"))?;
                let direction = match dir.expect_atom("minimize|maximize")?.to_ascii_lowercase().as_str() {
                    "minimize" => Direction::Minimize,
                    "maximize" => Direction::Maximize,
                    other => return Err(syntax(dir, format!("unknown metric direction `{other}`"))),
                };
                let e = items.get(2).ok_or_else(|| syntax(s, "missing metric expression"))?;
                metric = Some(Metric { direction, expr: ground_num(e)? });
            }
            ":horizon" => {
                if items.len() != 3 {
                    return Err(syntax(s, "expected `(:horizon START END)`"));
                }
                let h = Horizon { start: minutes(&items[1])?, end: minutes(&items[2])? };
                if h.end < h.start {
                    return Err(syntax(s, "horizon ends before it starts"));
                }
                horizon = Some(h);
            }
            _ => return Err(unsupported(s, head)),
        }
    }
    let domain_name = domain_name.ok_or_else(|| TaskError::Invalid("problem has no `(:domain ...)`".into()))?;

    let check = |a: &Atom, pos: Pos| -> Result<(), TaskError> {
        let schema = domain
            .predicate(&a.predicate)
            .ok_or_else(|| TaskError::UnknownPredicate { name: a.predicate.clone(), pos: Some(pos) })?;
        check_args(a, &schema.params, &objects, &domain.types, Some(pos))
    };
    for (a, pos) in &init_atoms {
        check(a, *pos)?;
    }
    for (a, pos) in &goals {
        check(a, *pos)?;
    }
    for (k, pos) in &init_fluents {
        let schema = domain
            .function(&k.predicate)
            .ok_or_else(|| TaskError::UnknownFunction { name: k.predicate.clone(), pos: Some(*pos) })?;
        check_args(k, &schema.params, &objects, &domain.types, Some(*pos))?;
    }
    let hz = horizon.unwrap_or_default();
    for (t, pos) in &tils {
        check(&t.atom, *pos)?;
        if t.time < hz.start || t.time > hz.end {
            return Err(TaskError::Invalid(format!(
                "{pos}: timed literal at {} lies outside the horizon [{}, {}]",
                t.time, hz.start, hz.end
            )));
        }
    }
    if let Some(m) = &metric {
        let mut fs = Vec::new();
        m.expr.fluents(&mut fs);
        for f in fs {
            let a = f.ground(&BTreeMap::new());
            let schema = domain
                .function(&a.predicate)
                .ok_or_else(|| TaskError::UnknownFunction { name: a.predicate.clone(), pos: None })?;
            check_args(&a, &schema.params, &objects, &domain.types, None)?;
        }
    }
    let mut tils: Vec<TimedLiteral> = tils.into_iter().map(|(t, _)| t).collect();
    tils.sort_by_key(|t| t.time);

    Ok(Instance {
        name,
        domain: domain_name,
        objects,
        init,
        fluents,
        tils,
        goals: goals.into_iter().map(|(a, _)| a).collect(),
        metric,
        horizon,
    })
}
