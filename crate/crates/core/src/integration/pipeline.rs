use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    evaluate_opportunities, formulate_goals, instantiate_variables, integrate_object, locate_object, rebase,
    select_ontology, CandidateGoal, DataProvider, Instantiation, IntegrationError, IntegrationReport, NoveltyReport,
    ObjectFacts, OpportunityDecision, ProviderError,
};
use crate::enrichment::{annotate_ontology_with, KnowledgeStore};
use crate::execution::{EventContext, Hook, HookResponse, Replacement, Tag};
use crate::matching::{rank_similar, MatchConfig, SimilarityRow};
use crate::ontology::{semantic_variance, Ontology, OntologyRepository, SvMode};
use crate::par::Execution;
use crate::planner::{Planner, PlannerConfig, WorldState};
use crate::task::{Atom, Minutes, Plan, PlanningTask};

/// Extended task, extended ontology and the new object's instantiation.
type Integrated = (PlanningTask, Ontology, Instantiation);

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PipelineConfig {
    pub matching: MatchConfig,
    pub planner: PlannerConfig,
    pub sv_mode: SvMode,
    pub exec: Execution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Adopted,
    NoCandidates,
    AllRejected,
    UnknownObject,
    Unplaced,
    InsufficientData,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectRun {
    pub object: String,
    /// Ontologies among the similar ones that know the object, with their
    /// semantic variance.
    pub located: Vec<(String, f64)>,
    pub selected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integration: Option<IntegrationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instantiation: Option<Instantiation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopped: Option<(Outcome, String)>,
}

/// Everything one observation went through. Only the serialized part is
/// logged; the adopted task, plan and ontology ride along for commit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineRun {
    pub time: Minutes,
    pub novelty: Vec<NoveltyReport>,
    pub similar: Vec<SimilarityRow>,
    pub objects: Vec<ObjectRun>,
    pub candidates: Vec<CandidateGoal>,
    pub decisions: Vec<OpportunityDecision>,
    pub winner: Option<CandidateGoal>,
    pub outcome: Outcome,
    #[serde(skip)]
    pub adopted: Option<(PlanningTask, Plan)>,
    #[serde(skip)]
    n_phi: Option<Ontology>,
    #[serde(skip)]
    facts: BTreeMap<String, ObjectFacts>,
}

impl PipelineRun {
    pub fn plan(&self) -> Option<&Plan> {
        self.adopted.as_ref().map(|(_, p)| p)
    }
}

struct Layered<'a> {
    inline: &'a BTreeMap<String, ObjectFacts>,
    learned: &'a BTreeMap<String, ObjectFacts>,
    inner: &'a dyn DataProvider,
}

impl DataProvider for Layered<'_> {
    fn facts(&self, object: &str) -> Result<Option<ObjectFacts>, ProviderError> {
        if let Some(f) = self.inline.get(object).or_else(|| self.learned.get(object)) {
            return Ok(Some(f.clone()));
        }
        self.inner.facts(object)
    }
}

/// Holds the enriched task ontology and repository between events.
pub struct Pipeline {
    n_phi: Ontology,
    repo: OntologyRepository,
    provider: Box<dyn DataProvider>,
    planner: Box<dyn Planner>,
    learned: BTreeMap<String, ObjectFacts>,
    cfg: PipelineConfig,
}

impl Pipeline {
    /// Builds the task ontology and enriches it and every repository member.
    pub fn new(
        task: &PlanningTask,
        repo: &OntologyRepository,
        store: &KnowledgeStore,
        provider: Box<dyn DataProvider>,
        planner: Box<dyn Planner>,
        cfg: PipelineConfig,
    ) -> Self {
        let n_phi = annotate_ontology_with(&Ontology::from_task(task), store, cfg.exec);
        let repo = OntologyRepository {
            ontologies: repo.ontologies.iter().map(|o| annotate_ontology_with(o, store, cfg.exec)).collect(),
        };
        Pipeline { n_phi, repo, provider, planner, learned: BTreeMap::new(), cfg }
    }

    pub fn n_phi(&self) -> &Ontology {
        &self.n_phi
    }

    pub fn repo(&self) -> &OntologyRepository {
        &self.repo
    }

    /// Runs every stage for the opportunity atoms observed at `now` on
    /// copies of the task and ontology; nothing is changed until
    /// [`Pipeline::commit`].
    pub fn evaluate(
        &self,
        now: Minutes,
        task: &PlanningTask,
        state: &WorldState,
        atoms: &[Atom],
        inline: &BTreeMap<String, ObjectFacts>,
    ) -> PipelineRun {
        let cfg = &self.cfg;
        let provider = Layered { inline, learned: &self.learned, inner: self.provider.as_ref() };
        let mut work = rebase(task, state, now);
        let mut n_work = self.n_phi.clone();

        let novelty: Vec<NoveltyReport> = atoms
            .iter()
            .map(|a| NoveltyReport::new(task, a.clone(), now))
            .filter(|n| !n.unknown_objects.is_empty())
            .collect();
        let similar = rank_similar(&self.n_phi, &self.repo, cfg.matching.filter_threshold, cfg.exec);
        let r_prime: Vec<Ontology> =
            similar.iter().filter(|r| r.selected).filter_map(|r| self.repo.get(&r.id).cloned()).collect();

        let mut unknown: Vec<&str> = Vec::new();
        for n in &novelty {
            for o in &n.unknown_objects {
                if !unknown.contains(&o.as_str()) {
                    unknown.push(o);
                }
            }
        }

        let mut objects = Vec::new();
        let mut integrated: Vec<(String, String)> = Vec::new();
        let mut facts = BTreeMap::new();
        for o in unknown {
            let mut run = ObjectRun {
                object: o.into(),
                located: vec![],
                selected: None,
                integration: None,
                instantiation: None,
                stopped: None,
            };
            let located = locate_object(o, &r_prime);
            run.located =
                located.iter().map(|x| (x.id.clone(), semantic_variance(x, cfg.sv_mode).unwrap_or(f64::NAN))).collect();
            if located.is_empty() {
                run.stopped = Some((Outcome::UnknownObject, "object unknown to all ontologies".into()));
                objects.push(run);
                continue;
            }
            let step = || -> Result<(IntegrationReport, Option<Integrated>), IntegrationError> {
                let (n_o, _) = select_ontology(&located, cfg.sv_mode)?;
                let res = integrate_object(&work, o, &n_work, n_o, &cfg.matching, cfg.exec)?;
                let (Some(mut t), Some(n)) = (res.task, res.n_phi) else { return Ok((res.report, None)) };
                let inst = instantiate_variables(&t, o, &provider, atoms, now)?;
                inst.apply(&mut t);
                Ok((res.report, Some((t, n, inst))))
            };
            match step() {
                Ok((report, next)) => {
                    run.selected = Some(report.ontology.clone());
                    let ty = report.object_type().map(str::to_string);
                    run.integration = Some(report);
                    match (next, ty) {
                        (Some((t, n, inst)), Some(ty)) => {
                            work = t;
                            n_work = n;
                            run.instantiation = Some(inst);
                            integrated.push((o.to_string(), ty));
                            if let Some(f) = inline.get(o) {
                                facts.insert(o.to_string(), f.clone());
                            }
                        }
                        _ => run.stopped = Some((Outcome::Unplaced, "type could not be positioned".into())),
                    }
                }
                Err(e) => {
                    let kind = match e {
                        IntegrationError::InsufficientData { .. } => Outcome::InsufficientData,
                        _ => Outcome::Error,
                    };
                    run.stopped = Some((kind, e.to_string()));
                }
            }
            objects.push(run);
        }

        let mut candidates: Vec<CandidateGoal> = Vec::new();
        for (o, ty) in &integrated {
            candidates.extend(formulate_goals(&work, o, ty));
        }
        for a in atoms.iter().filter(|a| a.args.iter().all(|o| task.instance.objects.contains_key(o))) {
            for o in &a.args {
                let ty = work.instance.objects[o].clone();
                candidates.extend(formulate_goals(&work, o, &ty));
            }
        }
        candidates.sort();
        candidates.dedup_by(|a, b| a.atom == b.atom);

        let mut out = PipelineRun {
            time: now,
            novelty,
            similar,
            objects,
            candidates,
            decisions: Vec::new(),
            winner: None,
            outcome: Outcome::NoCandidates,
            adopted: None,
            n_phi: None,
            facts,
        };
        if out.candidates.is_empty() {
            if integrated.is_empty() {
                if let Some((k, _)) = out.objects.iter().find_map(|r| r.stopped.clone()) {
                    out.outcome = k;
                }
            }
            return out;
        }
        let eval = evaluate_opportunities(&work, &out.candidates, self.planner.as_ref(), &cfg.planner, cfg.exec);
        out.outcome = Outcome::AllRejected;
        if let Some(best) = eval.best() {
            out.winner = Some(best.candidate.clone());
            out.adopted = Some((best.variant.clone(), best.plan.clone().expect("accepted decisions carry a plan")));
            out.n_phi = Some(n_work);
            out.outcome = Outcome::Adopted;
        }
        out.decisions = eval.decisions;
        out
    }

    /// Makes an adopted run permanent and returns the task and plan to
    /// execute from now on.
    pub fn commit(&mut self, run: &PipelineRun) -> Option<Replacement> {
        let (task, plan) = run.adopted.clone()?;
        if let Some(n) = &run.n_phi {
            self.n_phi = n.clone();
        }
        self.learned.extend(run.facts.iter().map(|(k, v)| (k.clone(), v.clone())));
        Some(Replacement { task, plan })
    }
}

impl Hook for Pipeline {
    fn on_event(&mut self, ctx: &EventContext<'_>) -> HookResponse {
        let atoms: Vec<Atom> =
            ctx.fresh.iter().filter(|a| ctx.classification.tag(a).is_some_and(Tag::is_opportunity)).cloned().collect();
        let run = self.evaluate(ctx.now, ctx.task, ctx.observed, &atoms, ctx.facts);
        let report = serde_json::to_value(&run).ok();
        HookResponse { report, replacement: self.commit(&run) }
    }
}
