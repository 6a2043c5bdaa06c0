//! Fixtures, generators and independent oracles shared by the integration
//! test targets.

#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use opportune::enrichment::{annotate_ontology, load_edges, KnowledgeEdge, KnowledgeStore, Relation};
use opportune::execution::{
    apply_event, build_timeline, discrepancies, initial_state, run, EventKind, NoHook, Scenario, SimConfig,
};
use opportune::integration::{FileDataProvider, Outcome, Pipeline, PipelineConfig};
use opportune::matching::{cosine_similarity, soft_tfidf, Corpus, TermBag};
use opportune::ontology::{
    load_dir, semantic_distance, semantic_variance, Concept, Ontology, OntologyRepository, SvMode,
};
use opportune::par::Execution;
use opportune::planner::{validate, BuiltinPlanner, WorldState};
use opportune::task::{parse_atom, parse_plan, Atom, Minutes, Plan, PlanningTask};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn atom(s: &str) -> Atom {
    parse_atom(s).unwrap()
}

pub fn valencia() -> PlanningTask {
    PlanningTask::parse(&read("valencia/domain.pddl"), &read("valencia/problem.pddl")).unwrap()
}

pub fn plan1() -> Plan {
    parse_plan(&read("valencia/plan1.txt")).unwrap()
}

pub fn repo() -> OntologyRepository {
    load_dir(fixture("ontologies/repo")).unwrap()
}

pub fn store() -> KnowledgeStore {
    load_edges(fixture("knowledge/edges.tsv")).unwrap().0
}

pub fn pipeline(task: &PlanningTask, exec: Execution) -> Pipeline {
    let provider = FileDataProvider::load(fixture("valencia/provider.json")).unwrap();
    let cfg = PipelineConfig { exec, ..Default::default() };
    Pipeline::new(task, &repo(), &store(), Box::new(provider), Box::new(BuiltinPlanner), cfg)
}

/// State observed at `now` while executing `plan`, which must not have an
/// action running at that instant.
pub fn state_at(task: &PlanningTask, plan: &Plan, now: Minutes) -> WorldState {
    assert!(!plan.steps.iter().any(|s| s.start < now && now < s.end()), "an action is running at {now}");
    let mut state = initial_state(task);
    for e in build_timeline(task, plan).unwrap().remaining() {
        if e.time < now || (e.time == now && matches!(e.kind, EventKind::TimedLiteral | EventKind::ActionEnd)) {
            apply_event(task, &mut state, e).unwrap();
        }
    }
    state.time = now;
    state
}

/// Simulates the Valencia day against `scenario` with a fresh pipeline.
pub fn simulate(scenario: &str, exec: Execution) -> opportune::execution::ExecutionLog {
    let task = valencia();
    let mut pipe = pipeline(&task, exec);
    let s = Scenario::load(fixture(scenario)).unwrap();
    run(&task, build_timeline(&task, &plan1()).unwrap(), &s, &mut pipe, &SimConfig::default())
}

pub fn simulate_quiet() -> opportune::execution::ExecutionLog {
    let task = valencia();
    run(&task, build_timeline(&task, &plan1()).unwrap(), &Scenario::default(), &mut NoHook, &SimConfig::default())
}

// ---------------------------------------------------------------------------
// Trees and the ancestor-set oracle

/// `parent[i] < i` for every non-root node; node 0 is the root.
pub fn random_parents(rng: &mut impl Rng, n: usize) -> Vec<Option<usize>> {
    (0..n).map(|i| if i == 0 { None } else { Some(rng.random_range(0..i)) }).collect()
}

/// Builds an ontology whose concept ids are a random relabelling of the
/// node indices, so that map order and tree order disagree.
pub fn tree_ontology(parents: &[Option<usize>], names: &[String]) -> Ontology {
    let mut o = Ontology::new("tree", names[0].clone());
    for (i, p) in parents.iter().enumerate().skip(1) {
        let p = p.expect("non-root node has a parent");
        o.concepts.insert(names[i].clone(), Concept::new(names[i].clone(), Some(&names[p])));
    }
    o
}

pub fn shuffled_names(rng: &mut impl Rng, n: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n).map(|i| format!("k{i:03}")).collect();
    names.shuffle(rng);
    names
}

pub fn oracle_ancestors(parents: &[Option<usize>], mut i: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::from([i]);
    while let Some(p) = parents[i] {
        out.insert(p);
        i = p;
    }
    out
}

pub fn oracle_distance(parents: &[Option<usize>], a: usize, b: usize) -> f64 {
    let (sa, sb) = (oracle_ancestors(parents, a), oracle_ancestors(parents, b));
    let union = sa.union(&sb).count() as f64;
    let inter = sa.intersection(&sb).count() as f64;
    (1.0 + (union - inter) / union).log2()
}

pub fn oracle_variance(parents: &[Option<usize>]) -> f64 {
    if parents.len() < 2 {
        return 0.0;
    }
    let sum: f64 = (1..parents.len()).map(|i| oracle_distance(parents, i, 0).powi(2)).sum();
    sum / (parents.len() - 1) as f64
}

// ---------------------------------------------------------------------------
// Random tours on the tourism domain and the permutation oracle

pub const HORIZON: (Minutes, Minutes) = (600, 1440);
pub const ACTIVE_UNTIL: Minutes = 1380;
const KINDS: [&str; 5] = ["aquarium", "architecture", "religious_site", "garden", "tower"];

/// One generated tour problem. Location 0 is the hotel.
#[derive(Debug, Clone)]
pub struct Tour {
    pub names: Vec<String>,
    pub kinds: Vec<&'static str>,
    /// Opening windows `[open, close)` per location; empty for the hotel.
    pub windows: Vec<Vec<(Minutes, Minutes)>>,
    pub visit: Vec<Minutes>,
    pub walk: Vec<Vec<Minutes>>,
    /// Attractions that must be visited.
    pub goals: Vec<usize>,
}

/// Times sit on a five-minute grid so that arrivals often coincide with
/// window boundaries.
pub fn random_tour(rng: &mut impl Rng) -> Tour {
    let n = rng.random_range(2..=6);
    let mut names = vec!["Hotel".to_string()];
    names.extend((1..n).map(|i| format!("Place{i}")));
    let kinds: Vec<&'static str> =
        (0..n).map(|i| if i == 0 { "hotel" } else { KINDS[rng.random_range(0..KINDS.len())] }).collect();
    let mut windows = vec![Vec::new()];
    for _ in 1..n {
        let mut w = Vec::new();
        let mut from = HORIZON.0;
        for _ in 0..rng.random_range(1..=2) {
            let open = from + 5 * rng.random_range(0..60);
            let close = (open + 5 * rng.random_range(4..=72)).min(1430);
            if open >= close {
                break;
            }
            w.push((open, close));
            from = close + 5 * rng.random_range(1..=24);
            if from >= 1400 {
                break;
            }
        }
        windows.push(w);
    }
    let visit: Vec<Minutes> = (0..n).map(|i| if i == 0 { 0 } else { 5 * rng.random_range(2..=24) }).collect();
    let walk: Vec<Vec<Minutes>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { 0 } else { 5 * rng.random_range(1..=12) }).collect()).collect();
    let mut goals: Vec<usize> = (1..n).filter(|_| rng.random_bool(0.75)).collect();
    if goals.is_empty() {
        goals.push(rng.random_range(1..n));
    }
    Tour { names, kinds, windows, visit, walk, goals }
}

impl Tour {
    pub fn problem_pddl(&self) -> String {
        let mut s = String::from("(define (problem random-tour)\n  (:domain tourism)\n  (:objects tourist - person");
        for (n, k) in self.names.iter().zip(&self.kinds) {
            write!(s, " {n} - {k}").unwrap();
        }
        s.push_str(")\n  (:init\n    (be tourist Hotel)\n    (= (visited_count tourist) 0)\n");
        writeln!(s, "    (at {} (active tourist)) (at {ACTIVE_UNTIL} (not (active tourist)))", HORIZON.0).unwrap();
        for (i, ws) in self.windows.iter().enumerate() {
            for (o, c) in ws {
                let n = &self.names[i];
                writeln!(s, "    (at {o} (open {n})) (at {c} (not (open {n})))").unwrap();
            }
        }
        for i in 1..self.names.len() {
            writeln!(s, "    (= (visit_duration {}) {})", self.names[i], self.visit[i]).unwrap();
        }
        for (i, row) in self.walk.iter().enumerate() {
            for (j, w) in row.iter().enumerate().filter(|(j, _)| *j != i) {
                writeln!(s, "    (= (walk_time {} {}) {w})", self.names[i], self.names[j]).unwrap();
            }
        }
        s.push_str("  )\n  (:goal (and");
        for g in &self.goals {
            write!(s, " (visited tourist {})", self.names[*g]).unwrap();
        }
        writeln!(
            s,
            " (be tourist Hotel)))\n  (:metric minimize (total-time))\n  (:horizon {} {}))",
            HORIZON.0, HORIZON.1
        )
        .unwrap();
        s
    }

    pub fn task(&self) -> PlanningTask {
        PlanningTask::parse(&read("valencia/domain.pddl"), &self.problem_pddl()).unwrap()
    }

    /// Shortest walking times over any intermediate stops.
    fn travel(&self) -> Vec<Vec<Minutes>> {
        let mut d = self.walk.clone();
        let n = d.len();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        d
    }

    /// Finishing time of visiting `order` then returning to the hotel,
    /// starting at the horizon start; `None` when a window or the activity
    /// deadline is missed. Every action must end strictly before a literal
    /// that would falsify one of its conditions.
    fn finish(&self, d: &[Vec<Minutes>], order: &[usize]) -> Option<Minutes> {
        let (mut t, mut at) = (HORIZON.0, 0);
        for &g in order {
            t += d[at][g];
            if at != g && t >= ACTIVE_UNTIL {
                return None;
            }
            let end = self.windows[g].iter().find_map(|&(o, c)| {
                let s = t.max(o);
                let e = s + self.visit[g];
                (e < c && e < ACTIVE_UNTIL).then_some(e)
            })?;
            t = end;
            at = g;
        }
        if at != 0 {
            t += d[at][0];
            if t >= ACTIVE_UNTIL {
                return None;
            }
        }
        Some(t)
    }

    /// Minimal total time over all visiting orders, or `None` when no order
    /// is feasible.
    pub fn oracle_total_time(&self) -> Option<Minutes> {
        let d = self.travel();
        let mut best: Option<Minutes> = None;
        let mut order = self.goals.clone();
        permute(&mut order, 0, &mut |o| {
            if let Some(t) = self.finish(&d, o) {
                best = Some(best.map_or(t, |b| b.min(t)));
            }
        });
        best.map(|t| t - HORIZON.0)
    }
}

fn permute(xs: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        f(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, f);
        xs.swap(k, i);
    }
}

// ---------------------------------------------------------------------------
// Property checks, shared between the acceptance run and the property target

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

const WORDS: &[&str] = &[
    "tower",
    "towers",
    "tour",
    "garden",
    "gardens",
    "plaza",
    "place",
    "museum",
    "church",
    "cathedral",
    "hotel",
    "bar",
    "jazz",
    "market",
    "square",
    "art",
];

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(WORDS), 0..max).prop_map(|v| v.into_iter().map(String::from).collect())
}

pub fn prop_cosine(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(words(12), words(12)), |(a, b)| {
            let (ba, bb) = (TermBag::from_tokens(a.clone()), TermBag::from_tokens(b.clone()));
            let ab = cosine_similarity(&ba, &bb);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - cosine_similarity(&bb, &ba)).abs() < 1e-12);
            if !a.is_empty() {
                prop_assert!((cosine_similarity(&ba, &ba) - 1.0).abs() < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_soft_tfidf(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(prop::collection::vec(words(8), 1..6), words(8), words(8), 0.5f64..1.0), |(docs, s, t, theta)| {
            let mut all = docs.clone();
            all.push(s.clone());
            all.push(t.clone());
            let corpus = Corpus::new(&all);
            let st = soft_tfidf(&s, &t, &corpus, theta);
            prop_assert!((0.0..=1.0).contains(&st), "score {st}");
            if !s.is_empty() {
                prop_assert!((soft_tfidf(&s, &s, &corpus, theta) - 1.0).abs() < 1e-9);
            }
            prop_assert_eq!(soft_tfidf(&[], &t, &corpus, theta), 0.0);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn small_ontology() -> impl Strategy<Value = Ontology> {
    (prop::sample::subsequence(WORDS, 1..8).prop_shuffle(), prop::collection::vec(any::<usize>(), 8)).prop_map(
        |(ids, picks)| {
            let parents: Vec<Option<usize>> =
                (0..ids.len()).map(|i| if i == 0 { None } else { Some(picks[i] % i) }).collect();
            let names: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            tree_ontology(&parents, &names)
        },
    )
}

fn edges(max: usize) -> impl Strategy<Value = Vec<KnowledgeEdge>> {
    let edge =
        (prop::sample::select(Relation::ALL), prop::sample::select(WORDS), prop::sample::select(WORDS), 0.0f64..3.0)
            .prop_map(|(relation, s, e, weight)| KnowledgeEdge { relation, start: s.into(), end: e.into(), weight });
    prop::collection::vec(edge, 0..max)
}

fn store_of(edges: &[KnowledgeEdge]) -> KnowledgeStore {
    let mut s = KnowledgeStore::new();
    for e in edges {
        s.insert(e.clone()).unwrap();
    }
    s
}

pub fn prop_enrichment(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(small_ontology(), edges(20), edges(10)), |(o, base, more)| {
            let small = store_of(&base);
            let big = store_of(&[base, more].concat());
            let once = annotate_ontology(&o, &small);
            prop_assert_eq!(&annotate_ontology(&once, &small), &once);
            let wider = annotate_ontology(&o, &big);
            prop_assert_eq!(once.concepts.keys().collect::<Vec<_>>(), o.concepts.keys().collect::<Vec<_>>());
            for (id, c) in &once.concepts {
                let w = &wider.concepts[id];
                prop_assert_eq!(&c.parent, &o.concepts[id].parent);
                prop_assert_eq!(&c.labels, &o.concepts[id].labels);
                for a in &c.annotations {
                    prop_assert!(w.annotations.contains(a), "{id}: {a:?} lost");
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn atom_set() -> impl Strategy<Value = BTreeSet<Atom>> {
    prop::collection::btree_set(
        (prop::sample::select(&["open", "visited", "be"][..]), prop::sample::select(WORDS))
            .prop_map(|(p, x)| Atom::new(p, [x])),
        0..10,
    )
}

pub fn prop_discrepancies(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(atom_set(), atom_set()), |(a, b)| {
            let ab = discrepancies(&a, &b);
            let ba = discrepancies(&b, &a);
            prop_assert_eq!(&ab.observed_not_expected, &ba.expected_not_observed);
            prop_assert_eq!(&ab.expected_not_observed, &ba.observed_not_expected);
            prop_assert!(ab.observed_not_expected.is_disjoint(&ab.expected_not_observed));
            let sym: BTreeSet<Atom> = a.symmetric_difference(&b).cloned().collect();
            let both: BTreeSet<Atom> = ab.observed_not_expected.union(&ab.expected_not_observed).cloned().collect();
            prop_assert_eq!(sym, both);
            prop_assert!(discrepancies(&a, &a).is_empty());
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn prop_distance(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&small_ontology(), |o| {
            let ids: Vec<&String> = o.concepts.keys().collect();
            for a in &ids {
                prop_assert_eq!(semantic_distance(&o, a, a).unwrap(), 0.0);
                for b in &ids {
                    let d = semantic_distance(&o, a, b).unwrap();
                    prop_assert!((0.0..1.0).contains(&d));
                    prop_assert_eq!(d, semantic_distance(&o, b, a).unwrap());
                }
            }
            let sv = semantic_variance(&o, SvMode::Squared).unwrap();
            prop_assert!((0.0..1.0).contains(&sv));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Observations tried against the pipeline: some integrate, some cannot.
const OBSERVED: &[&str] = &[
    "(open Virgen_plaza)",
    "(open Mercado_Colon)",
    "(open Atlantis_pavilion)",
    "(open Jimmy_Glass_Jazz_bar)",
    "(open Oceanografic)",
    "(raining)",
];

/// A rejected or failed evaluation leaves the pipeline and the task
/// untouched; an adopted one yields a plan valid for the extended task.
pub fn prop_transactional(cases: u32) -> Result<(), String> {
    let task = valencia();
    let plan = plan1();
    let idle: Vec<Minutes> =
        plan.steps.iter().map(|s| s.end()).filter(|t| *t < plan.steps.last().unwrap().end()).collect();
    let pipe = RefCell::new(pipeline(&task, Execution::default()));
    let states: BTreeMap<Minutes, WorldState> = idle.iter().map(|t| (*t, state_at(&task, &plan, *t))).collect();
    let (task_pddl, n_phi) = (task.to_pddl(), pipe.borrow().n_phi().to_json());
    let strategy = (prop::sample::select(idle), prop::sample::subsequence(OBSERVED, 1..3));
    let mut r = runner(cases);
    r.run(&strategy, |(now, obs)| {
        let atoms: Vec<Atom> = obs.iter().map(|s| atom(s)).collect();
        let mut pipe = pipe.borrow_mut();
        let run = pipe.evaluate(now, &task, &states[&now], &atoms, &BTreeMap::new());
        prop_assert_eq!(&pipe.n_phi().to_json(), &n_phi);
        prop_assert_eq!(&task.to_pddl(), &task_pddl);
        match run.outcome {
            Outcome::Adopted => {
                let (t, p) = run.adopted.as_ref().unwrap();
                prop_assert!(validate(p, t).is_valid());
            }
            _ => {
                prop_assert!(run.adopted.is_none());
                prop_assert!(pipe.commit(&run).is_none());
                prop_assert_eq!(&pipe.n_phi().to_json(), &n_phi);
            }
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

/// Same inputs give byte-identical logs, sequentially or in parallel.
pub fn check_determinism() -> Result<(), String> {
    let a = simulate("valencia/scenario.json", Execution::Parallel).to_jsonl();
    let b = simulate("valencia/scenario.json", Execution::Parallel).to_jsonl();
    let c = simulate("valencia/scenario.json", Execution::Sequential).to_jsonl();
    if a.is_empty() || a != b || a != c {
        return Err("execution logs differ between identical runs".into());
    }
    Ok(())
}
