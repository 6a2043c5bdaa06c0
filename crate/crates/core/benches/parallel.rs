//! Sequential against parallel execution of the data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opportune::enrichment::{annotate_ontology_with, load_edges, KnowledgeEdge, KnowledgeStore, Relation};
use opportune::integration::{evaluate_opportunities, CandidateGoal};
use opportune::matching::rank_similar;
use opportune::ontology::{Concept, Ontology, OntologyRepository};
use opportune::par::Execution;
use opportune::planner::{BuiltinPlanner, PlannerConfig};
use opportune::task::{parse_atom, PlanningTask};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];
const WORDS: &[&str] =
    &["tower", "garden", "plaza", "museum", "church", "market", "bridge", "beach", "park", "gallery"];

fn fixture(rel: &str) -> String {
    format!("{}/../../fixtures/{rel}", env!("CARGO_MANIFEST_DIR"))
}

/// A wide ontology of `n` concepts named after compounds of `WORDS`.
fn synthetic(id: &str, n: usize, salt: usize) -> Ontology {
    let mut o = Ontology::new(id, "thing");
    for i in 0..n {
        let name = format!("{}_{}_{i}", WORDS[(i + salt) % WORDS.len()], WORDS[(i * 7 + salt) % WORDS.len()]);
        let parent = if i < 10 { "thing".to_string() } else { o.concepts.keys().nth(1 + i % 10).unwrap().clone() };
        o.add_concept(Concept::new(name, Some(&parent))).unwrap();
    }
    o
}

fn synthetic_store() -> KnowledgeStore {
    let mut s = load_edges(fixture("knowledge/edges.tsv")).unwrap().0;
    for (i, a) in WORDS.iter().enumerate() {
        for (j, b) in WORDS.iter().enumerate().filter(|(j, _)| *j != i) {
            let relation = Relation::ALL[(i + j) % Relation::ALL.len()];
            s.insert(KnowledgeEdge { relation, start: a.to_string(), end: b.to_string(), weight: 1.0 }).unwrap();
        }
    }
    s
}

fn annotate(c: &mut Criterion) {
    let o = synthetic("big", 2000, 0);
    let store = synthetic_store();
    let mut g = c.benchmark_group("annotate");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, o.len()), |b| {
            b.iter(|| annotate_ontology_with(black_box(&o), &store, exec))
        });
    }
    g.finish();
}

fn similarity(c: &mut Criterion) {
    let store = synthetic_store();
    let base = annotate_ontology_with(&synthetic("task", 50, 3), &store, Execution::Parallel);
    let ontologies =
        (0..64).map(|i| annotate_ontology_with(&synthetic(&format!("o{i}"), 300, i), &store, Execution::Parallel));
    let repo = OntologyRepository::new(ontologies.collect()).unwrap();
    let mut g = c.benchmark_group("rank_similar");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, repo.len()), |b| {
            b.iter(|| rank_similar(black_box(&base), &repo, 0.5, exec))
        });
    }
    g.finish();
}

fn opportunities(c: &mut Criterion) {
    let d = std::fs::read_to_string(fixture("valencia/domain.pddl")).unwrap();
    let p = std::fs::read_to_string(fixture("valencia/problem.pddl")).unwrap();
    let mut task = PlanningTask::parse(&d, &p).unwrap();
    let visits: Vec<_> = task.instance.goals.iter().filter(|g| g.predicate == "visited").cloned().collect();
    task.instance.goals.retain(|g| g.predicate != "visited");
    let mut candidates: Vec<CandidateGoal> =
        visits.iter().map(|a| CandidateGoal { atom: a.clone(), provenance: visits[0].clone() }).collect();
    let ocean = parse_atom("(visited tourist Oceanografic)").unwrap();
    candidates.push(CandidateGoal { atom: ocean, provenance: visits[0].clone() });
    let mut g = c.benchmark_group("evaluate_opportunities");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, candidates.len()), |b| {
            b.iter(|| {
                evaluate_opportunities(black_box(&task), &candidates, &BuiltinPlanner, &PlannerConfig::default(), exec)
            })
        });
    }
    g.finish();
}

criterion_group!(benches, annotate, similarity, opportunities);
criterion_main!(benches);
