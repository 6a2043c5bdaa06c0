use std::fmt::Write as _;

use super::*;

fn params(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{} - {}", p.name, p.ty)).collect::<Vec<_>>().join(" ")
}

fn schema(s: &PredicateSchema) -> String {
    if s.params.is_empty() {
        format!("({})", s.name)
    } else {
        format!("({} {})", s.name, params(&s.params))
    }
}

fn condition(c: &Condition) -> String {
    let lit = if c.positive { c.atom.to_string() } else { format!("(not {})", c.atom) };
    match c.when {
        CondTime::AtStart => format!("(at start {lit})"),
        CondTime::OverAll => format!("(over all {lit})"),
    }
}

fn effect(e: &Effect) -> String {
    let body = match &e.kind {
        EffectKind::Add(a) => a.to_string(),
        EffectKind::Delete(a) => format!("(not {a})"),
        EffectKind::Increase(f, v) => format!("(increase {f} {v})"),
        EffectKind::Decrease(f, v) => format!("(decrease {f} {v})"),
        EffectKind::Assign(f, v) => format!("(assign {f} {v})"),
    };
    match e.when {
        EffTime::AtStart => format!("(at start {body})"),
        EffTime::AtEnd => format!("(at end {body})"),
    }
}

fn conj(items: Vec<String>, indent: &str) -> String {
    match items.len() {
        0 => "()".into(),
        1 => items.into_iter().next().unwrap_or_default(),
        _ => format!("(and\n{indent}  {})", items.join(&format!("\n{indent}  "))) + ")",
    }
}

pub fn write_domain(d: &Domain) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = writeln!(s, "  (:requirements {})", d.requirements.join(" "));
    }
    s.push_str("  (:types");
    for (child, parent) in d.types.entries() {
        let _ = write!(s, "\n    {child} - {parent}");
    }
    s.push_str(")\n");
    if !d.predicates.is_empty() {
        s.push_str("  (:predicates");
        for p in &d.predicates {
            let _ = write!(s, "\n    {}", schema(p));
        }
        s.push_str(")\n");
    }
    if !d.functions.is_empty() {
        s.push_str("  (:functions");
        for p in &d.functions {
            let _ = write!(s, "\n    {}", schema(p));
        }
        s.push_str(")\n");
    }
    for a in &d.actions {
        let _ = writeln!(s, "  (:durative-action {}", a.name);
        let _ = writeln!(s, "    :parameters ({})", params(&a.params));
        let _ = writeln!(s, "    :duration (= ?duration {})", a.duration);
        let _ = writeln!(s, "    :condition {}", conj(a.conditions.iter().map(condition).collect(), "    "));
        let _ = writeln!(s, "    :effect {})", conj(a.effects.iter().map(effect).collect(), "    "));
    }
    s.push_str(")\n");
    s
}

pub fn write_problem(p: &Instance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (problem {})", p.name);
    let _ = writeln!(s, "  (:domain {})", p.domain);
    s.push_str("  (:objects");
    for (o, t) in &p.objects {
        let _ = write!(s, "\n    {o} - {t}");
    }
    s.push_str(")\n  (:init");
    for a in &p.init {
        let _ = write!(s, "\n    {a}");
    }
    for (k, v) in &p.fluents {
        let _ = write!(s, "\n    (= {k} {})", fmt_num(*v));
    }
    for t in &p.tils {
        let _ = write!(s, "\n    {t}");
    }
    s.push_str(")\n");
    let goals: Vec<String> = p.goals.iter().map(ToString::to_string).collect();
    let _ = writeln!(s, "  (:goal {})", conj(goals, "  "));
    if let Some(m) = &p.metric {
        let dir = match m.direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        };
        let _ = writeln!(s, "  (:metric {dir} {})", m.expr);
    }
    if let Some(h) = &p.horizon {
        let _ = writeln!(s, "  (:horizon {} {})", h.start, h.end);
    }
    s.push_str(")\n");
    s
}
