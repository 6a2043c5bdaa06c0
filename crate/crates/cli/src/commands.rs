use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use opportune::config::Config;
use opportune::enrichment::{annotate_ontology_with, load_edges, lookup_terms, KnowledgeStore};
use opportune::execution::{apply_event, build_timeline, initial_state, run, EventKind, Scenario, SimulationReport};
use opportune::integration::{DataProvider, FileDataProvider, Pipeline};
use opportune::matching::{position_type_with, rank_similar};
use opportune::ontology::{self, semantic_variance, Ontology, OntologyRepository};
use opportune::planner::{BuiltinPlanner, ExternalPlanner, Planner, Solution, SolveOutcome, Strategy, WorldState};
use opportune::task::{parse_atom, parse_plan, Minutes, Plan, PlanningTask};

use crate::{Cli, Cmd, Exit, OntologyCmd, PipelineCmd, Sources, StrategyArg, TaskArgs};

pub fn dispatch(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    let pretty = cli.pretty;
    match cli.cmd {
        Cmd::Ontology(c) => ontology_cmd(c, &cfg, pretty),
        Cmd::Align { target, source, concept, edges } => {
            let mut n_phi = load_ontology(&target)?;
            let mut n_o = load_ontology(&source)?;
            if let Some(store) = knowledge(&cfg, edges.as_deref(), &[&n_phi, &n_o])? {
                n_phi = annotate_ontology_with(&n_phi, &store, cfg.exec());
                n_o = annotate_ontology_with(&n_o, &store, cfg.exec());
            }
            let p = position_type_with(&n_phi, &n_o, &concept, &cfg.matching, cfg.exec())?;
            if pretty {
                println!("{concept}: {:?} by rule {} ({:?})", p.outcome, p.rule_number, p.rule);
                for c in &p.alignment.correspondences {
                    println!("  {} = {} ({:.4})", c.source, c.target, c.score);
                }
                Ok(())
            } else {
                emit(&serde_json::to_value(&p)?)
            }
        }
        Cmd::Plan { task, strategy, out } => {
            let mut cfg = cfg;
            if let Some(s) = strategy {
                cfg.planner.strategy = match s {
                    StrategyArg::Optimal => Strategy::Optimal,
                    StrategyArg::Greedy => Strategy::Greedy,
                };
            }
            let t = load_task(&task)?;
            let sol = solve(planner(&cfg).as_ref(), &t, &cfg)?;
            if let Some(p) = out {
                fs::write(&p, sol.plan.to_string()).with_context(|| format!("cannot write {}", p.display()))?;
            }
            if pretty {
                print!("{}", sol.plan);
                println!("; metric {}", sol.metric);
                Ok(())
            } else {
                emit(&json!({"metric": sol.metric, "end": sol.plan.end(), "steps": steps(&sol.plan)}))
            }
        }
        Cmd::Simulate { task, plan, scenario, log, sources } => {
            let t = load_task(&task)?;
            let planner = planner(&cfg);
            let plan = match plan {
                Some(p) => load_plan(&p)?,
                None => solve(planner.as_ref(), &t, &cfg)?.plan,
            };
            let scenario = Scenario::load(&scenario)?;
            let timeline = build_timeline(&t, &plan).map_err(|v| anyhow!("the plan does not validate: {v}"))?;
            let mut pipe = pipeline(&cfg, &sources, &t, planner)?;
            let out = run(&t, timeline, &scenario, &mut pipe, &cfg.execution);
            log::info!("hooks took {} ms", out.hook_millis);
            if let Some(p) = log {
                fs::write(&p, out.to_jsonl()).with_context(|| format!("cannot write {}", p.display()))?;
            }
            if pretty {
                print_report(&out.report);
                Ok(())
            } else {
                emit(&serde_json::to_value(&out.report)?)
            }
        }
        Cmd::Pipeline(PipelineCmd::Run { task, plan, at, observe, sources }) => {
            let t = load_task(&task)?;
            let now = at.unwrap_or(t.instance.horizon().start);
            let plan = plan.map(|p| load_plan(&p)).transpose()?;
            let mut state = state_at(&t, plan.as_ref(), now)?;
            let atoms = observe.iter().map(|a| parse_atom(a)).collect::<Result<Vec<_>, _>>()?;
            state.atoms.extend(atoms.iter().cloned());
            let pipe = pipeline(&cfg, &sources, &t, planner(&cfg))?;
            let r = pipe.evaluate(now, &t, &state, &atoms, &BTreeMap::new());
            if pretty {
                println!("{now}: {:?}", r.outcome);
                for o in &r.objects {
                    let ty = o.integration.as_ref().and_then(|i| i.object_type());
                    println!("  {} from {:?} as {:?} {:?}", o.object, o.selected, ty, o.stopped);
                }
                if let Some(p) = r.plan() {
                    print!("{p}");
                }
                Ok(())
            } else {
                emit(&serde_json::to_value(&r)?)
            }
        }
    }
}

fn ontology_cmd(c: OntologyCmd, cfg: &Config, pretty: bool) -> Result<()> {
    match c {
        OntologyCmd::Build { task, out } => write_ontology(&Ontology::from_task(&load_task(&task)?), out.as_deref()),
        OntologyCmd::Enrich { ontology, edges, out } => {
            let o = load_ontology(&ontology)?;
            let store = knowledge(cfg, edges.as_deref(), &[&o])?.ok_or_else(|| anyhow!("no knowledge edges given"))?;
            write_ontology(&annotate_ontology_with(&o, &store, cfg.exec()), out.as_deref())
        }
        OntologyCmd::Sv { ontology } => {
            println!("{:.4}", semantic_variance(&load_ontology(&ontology)?, cfg.ontology.sv_mode)?);
            Ok(())
        }
        OntologyCmd::Similar { ontology, repo, edges } => {
            let mut n_phi = load_ontology(&ontology)?;
            let mut repo = ontology::load_dir(&repo)?;
            let all: Vec<&Ontology> = std::iter::once(&n_phi).chain(&repo.ontologies).collect();
            if let Some(store) = knowledge(cfg, edges.as_deref(), &all)? {
                n_phi = annotate_ontology_with(&n_phi, &store, cfg.exec());
                repo = enrich_repo(&repo, &store, cfg);
            }
            let rows = rank_similar(&n_phi, &repo, cfg.matching.filter_threshold, cfg.exec());
            if pretty {
                for r in &rows {
                    println!("{:<12} {:.4} {}", r.id, r.score, if r.selected { "selected" } else { "-" });
                }
                Ok(())
            } else {
                emit(&serde_json::to_value(&rows)?)
            }
        }
    }
}

fn emit(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
}

fn load_task(a: &TaskArgs) -> Result<PlanningTask> {
    let (d, p) = (read(&a.domain)?, read(&a.problem)?);
    PlanningTask::parse(&d, &p).with_context(|| format!("{} / {}", a.domain.display(), a.problem.display()))
}

fn load_plan(p: &Path) -> Result<Plan> {
    parse_plan(&read(p)?).with_context(|| p.display().to_string())
}

fn load_ontology(p: &Path) -> Result<Ontology> {
    Ok(ontology::load(p)?)
}

fn write_ontology(o: &Ontology, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => Ok(ontology::save(o, p)?),
        None => {
            println!("{}", o.to_json());
            Ok(())
        }
    }
}

fn steps(plan: &Plan) -> Vec<String> {
    plan.steps.iter().map(|s| format!("{}: {} [{}]", s.start, s.action, s.duration)).collect()
}

fn planner(cfg: &Config) -> Box<dyn Planner> {
    match &cfg.external_planner {
        Some(x) => Box::new(ExternalPlanner { program: x.program.clone(), args: x.args.clone() }),
        None => Box::new(BuiltinPlanner),
    }
}

fn solve(planner: &dyn Planner, t: &PlanningTask, cfg: &Config) -> Result<Solution> {
    match planner.solve(t, &cfg.planner)? {
        SolveOutcome::Solved(s) => Ok(s),
        SolveOutcome::Unsolvable => Err(Exit { code: 2, msg: "no plan achieves the goals".into() }.into()),
        SolveOutcome::BudgetExhausted { .. } => Err(Exit { code: 3, msg: "search budget exhausted".into() }.into()),
    }
}

/// Edge table from the flag or the configuration, topped up online for the
/// terms of `ontologies` when enabled. `None` when no source is configured.
fn knowledge(cfg: &Config, edges: Option<&Path>, ontologies: &[&Ontology]) -> Result<Option<KnowledgeStore>> {
    let path: Option<PathBuf> = edges.map(Path::to_path_buf).or_else(|| cfg.knowledge.edges.clone());
    let mut store = match &path {
        Some(p) => {
            let (s, report) = load_edges(p)?;
            for (line, why) in &report.skipped {
                log::warn!("{}:{line}: {why}", p.display());
            }
            s
        }
        None if cfg.knowledge.online => KnowledgeStore::new(),
        None => return Ok(None),
    };
    if cfg.knowledge.online {
        let terms: Vec<String> = ontologies.iter().flat_map(|o| o.concepts.values()).flat_map(lookup_terms).collect();
        fetch_terms(cfg, &mut store, &terms)?;
    }
    Ok(Some(store))
}

#[cfg(feature = "online")]
fn fetch_terms(cfg: &Config, store: &mut KnowledgeStore, terms: &[String]) -> Result<()> {
    use opportune::enrichment::{ConceptNetClient, UreqTransport};
    let transport = UreqTransport::new(std::time::Duration::from_millis(cfg.knowledge.timeout_ms));
    let mut client = ConceptNetClient::new(cfg.knowledge.endpoint.clone(), Box::new(transport));
    if let Some(c) = &cfg.knowledge.cache {
        client = client.with_cache(c.clone());
    }
    let summary = client.augment(store, terms);
    for (term, why) in &summary.failures {
        log::warn!("no edges fetched for `{term}`: {why}");
    }
    Ok(())
}

#[cfg(not(feature = "online"))]
fn fetch_terms(_cfg: &Config, _store: &mut KnowledgeStore, _terms: &[String]) -> Result<()> {
    bail!("knowledge.online needs a build with the `online` feature")
}

fn enrich_repo(repo: &OntologyRepository, store: &KnowledgeStore, cfg: &Config) -> OntologyRepository {
    OntologyRepository {
        ontologies: repo.ontologies.iter().map(|o| annotate_ontology_with(o, store, cfg.exec())).collect(),
    }
}

fn provider(cfg: &Config, sources: &Sources) -> Result<Box<dyn DataProvider>> {
    if let Some(p) = sources.provider.as_ref().or(cfg.provider.path.as_ref()) {
        return Ok(Box::new(FileDataProvider::load(p)?));
    }
    match &cfg.provider.endpoint {
        #[cfg(feature = "online")]
        Some(url) => Ok(Box::new(opportune::integration::HttpDataProvider::new(
            url.clone(),
            std::time::Duration::from_millis(cfg.provider.timeout_ms),
        ))),
        #[cfg(not(feature = "online"))]
        Some(_) => bail!("provider.endpoint needs a build with the `online` feature"),
        None => Ok(Box::new(FileDataProvider::default())),
    }
}

fn pipeline(cfg: &Config, sources: &Sources, task: &PlanningTask, planner: Box<dyn Planner>) -> Result<Pipeline> {
    let repo = match sources.repo.as_ref().or(cfg.ontology.repo.as_ref()) {
        Some(d) => ontology::load_dir(d)?,
        None => OntologyRepository::default(),
    };
    let n_phi = Ontology::from_task(task);
    let all: Vec<&Ontology> = std::iter::once(&n_phi).chain(&repo.ontologies).collect();
    let store = knowledge(cfg, sources.edges.as_deref(), &all)?.unwrap_or_default();
    Ok(Pipeline::new(task, &repo, &store, provider(cfg, sources)?, planner, cfg.pipeline()))
}

/// World state at `now`: every timed literal up to then, plus the plan's
/// events when a plan is given. No action may be running at `now`.
fn state_at(task: &PlanningTask, plan: Option<&Plan>, now: Minutes) -> Result<WorldState> {
    let start = task.instance.horizon().start;
    if now < start {
        bail!("time {now} is before the horizon start {start}");
    }
    let empty = Plan::default();
    let plan = plan.unwrap_or(&empty);
    if let Some(s) = plan.steps.iter().find(|s| s.start < now && now < s.end()) {
        bail!("`{}` is running at {now}", s.action);
    }
    let mut state = initial_state(task);
    let mut events: Vec<_> = Vec::new();
    if plan.is_empty() {
        let mut tils = task.instance.tils.clone();
        tils.sort_by_key(|l| l.time);
        for l in tils.into_iter().filter(|l| l.time <= now) {
            if l.positive {
                state.atoms.insert(l.atom);
            } else {
                state.atoms.remove(&l.atom);
            }
        }
    } else {
        let tl = build_timeline(task, plan).map_err(|v| anyhow!("the plan does not validate: {v}"))?;
        events.extend(tl.remaining().iter().cloned());
    }
    for e in &events {
        let due = e.time < now || (e.time == now && matches!(e.kind, EventKind::TimedLiteral | EventKind::ActionEnd));
        if due {
            apply_event(task, &mut state, e).map_err(|m| anyhow!(m))?;
        }
    }
    state.time = now;
    Ok(state)
}

fn counts(m: &BTreeMap<String, usize>) -> String {
    m.iter().map(|(k, v)| format!("{k} {v}")).collect::<Vec<_>>().join(", ")
}

fn print_report(r: &SimulationReport) {
    for p in &r.plans {
        println!("plan {} adopted at {}, ends {}: {}", p.id, p.adopted_at, p.end, counts(&p.projected));
    }
    for o in &r.opportunities {
        let winner = o.pointer("/winner/atom").and_then(Value::as_str).unwrap_or("-");
        println!("opportunity at {}: {} {}", o["time"], o["outcome"].as_str().unwrap_or("?"), winner);
    }
    for f in &r.failures {
        println!("failure at {} (plan {}): {}", f.time, f.plan_id, f.message);
    }
    println!("completed: {}", counts(&r.completed));
    if r.goals_met {
        println!("all goals met at {}", r.end_time);
    } else {
        let unmet: Vec<String> = r.unmet_goals.iter().map(ToString::to_string).collect();
        println!("unmet goals at {}: {}", r.end_time, unmet.join(" "));
    }
}
