//! Forward search over sequential durative actions.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use fixedbitset::FixedBitSet;

use super::ground::{minutes, GroundAction, Grounded, NumOp, Phase};
use super::{PlannerConfig, SearchStats, Strategy};
use crate::task::{Direction, Minutes, Plan, PlanStep};

#[derive(Debug, Clone)]
pub(crate) struct SState {
    pub atoms: FixedBitSet,
    pub fluents: Vec<f64>,
    pub time: Minutes,
    pub til: usize,
}

pub(crate) struct Searcher<'g> {
    g: &'g Grounded,
    start: Minutes,
    end: Minutes,
    direction: Direction,
    time_metric: bool,
    use_dominance: bool,
    til_times: Vec<Minutes>,
    cfg: PlannerConfig,
    clock: Instant,
    pub stats: SearchStats,
    exhausted: bool,
    best: Option<(f64, Vec<PlanStep>)>,
    seen: HashMap<(FixedBitSet, Vec<u64>), Minutes>,
    seen_exact: HashMap<(FixedBitSet, Vec<u64>, Minutes), ()>,
}

pub(crate) enum SearchResult {
    Found(Plan, f64),
    Unsolvable,
    Budget(Option<(Plan, f64)>),
}

fn apply_phase(state: &mut SState, phase: &Phase, elapsed: f64) -> bool {
    let before = state.fluents.clone();
    for &d in &phase.del {
        state.atoms.set(d, false);
    }
    for &a in &phase.add {
        state.atoms.insert(a);
    }
    for n in &phase.num {
        let Some(v) = n.expr.eval(&before, elapsed) else {
            return false;
        };
        let cur = before[n.fluent];
        let new = match n.op {
            NumOp::Assign => v,
            NumOp::Increase if cur.is_finite() => cur + v,
            NumOp::Decrease if cur.is_finite() => cur - v,
            _ => return false,
        };
        state.fluents[n.fluent] = new;
    }
    true
}

impl<'g> Searcher<'g> {
    pub(crate) fn new(
        g: &'g Grounded,
        start: Minutes,
        end: Minutes,
        direction: Direction,
        time_metric: bool,
        cfg: PlannerConfig,
    ) -> Self {
        let mut til_times: Vec<Minutes> = g.tils.iter().map(|t| t.time).collect();
        til_times.dedup();
        Searcher {
            g,
            start,
            end,
            direction,
            time_metric,
            use_dominance: g.til_disjoint && (time_metric || !g.metric_mentions_time),
            til_times,
            cfg,
            clock: Instant::now(),
            stats: SearchStats::default(),
            exhausted: false,
            best: None,
            seen: HashMap::new(),
            seen_exact: HashMap::new(),
        }
    }

    pub(crate) fn initial(&self) -> SState {
        let mut atoms = FixedBitSet::with_capacity(self.g.atoms.len());
        for &i in &self.g.init {
            atoms.insert(i);
        }
        let mut s = SState { atoms, fluents: self.g.init_fluents.clone(), time: self.start, til: 0 };
        self.advance(&mut s, self.start);
        s
    }

    /// Applies every timed literal due at or before `t`.
    pub(crate) fn advance(&self, s: &mut SState, t: Minutes) {
        while let Some(til) = self.g.tils.get(s.til) {
            if til.time > t {
                break;
            }
            s.atoms.set(til.atom, til.positive);
            s.til += 1;
        }
        s.time = s.time.max(t);
    }

    fn holds(s: &SState, pos: &[usize], neg: &[usize]) -> bool {
        pos.iter().all(|&i| s.atoms.contains(i)) && neg.iter().all(|&i| !s.atoms.contains(i))
    }

    fn elapsed(&self, t: Minutes) -> f64 {
        (t - self.start) as f64
    }

    /// Runs `a` starting exactly at `s.time`; returns the state at its end.
    pub(crate) fn run_at(&self, s: &SState, a: &GroundAction) -> Option<(SState, Minutes)> {
        if !Self::holds(s, &a.start_pos, &a.start_neg) || !Self::holds(s, &a.over_pos, &a.over_neg) {
            return None;
        }
        let dur = minutes(a.duration.eval(&s.fluents, self.elapsed(s.time))?)?;
        let end = s.time + dur;
        if end > self.end {
            return None;
        }
        let mut n = s.clone();
        if !apply_phase(&mut n, &a.at_start, self.elapsed(s.time)) || !Self::holds(&n, &a.over_pos, &a.over_neg) {
            return None;
        }
        while let Some(til) = self.g.tils.get(n.til) {
            if til.time > end {
                break;
            }
            let t = til.time;
            self.advance(&mut n, t);
            if !Self::holds(&n, &a.over_pos, &a.over_neg) {
                return None;
            }
        }
        n.time = end;
        if !apply_phase(&mut n, &a.at_end, self.elapsed(end)) {
            return None;
        }
        Some((n, dur))
    }

    fn timeless_ok(&self, s: &SState, a: &GroundAction) -> bool {
        let m = &self.g.til_mask;
        a.start_pos.iter().chain(&a.over_pos).all(|&i| m[i] || s.atoms.contains(i))
            && a.start_neg.iter().chain(&a.over_neg).all(|&i| m[i] || !s.atoms.contains(i))
    }

    /// Earliest start at or after `s.time`, trying `s.time` then every later
    /// timed-literal time.
    pub(crate) fn earliest(&self, s: &SState, a: &GroundAction) -> Option<(PlanStep, SState)> {
        if !self.timeless_ok(s, a) {
            return None;
        }
        let later = self.til_times.iter().copied().filter(|&t| t > s.time && t <= self.end);
        for t in std::iter::once(s.time).chain(later) {
            let mut w = s.clone();
            self.advance(&mut w, t);
            if let Some((n, dur)) = self.run_at(&w, a) {
                return Some((PlanStep { start: t, action: a.atom.clone(), duration: dur }, n));
            }
        }
        None
    }

    pub(crate) fn successors(&self, s: &SState) -> Vec<(PlanStep, SState)> {
        let mut out: Vec<(PlanStep, SState)> = self.g.actions.iter().filter_map(|a| self.earliest(s, a)).collect();
        out.sort_by(|a, b| a.0.end().cmp(&b.0.end()).then_with(|| a.0.action.cmp(&b.0.action)));
        out
    }

    fn is_goal(&self, s: &SState) -> bool {
        self.g.goals.iter().all(|&i| s.atoms.contains(i))
    }

    fn metric(&self, s: &SState) -> Option<f64> {
        self.g.metric.eval(&s.fluents, self.elapsed(s.time))
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.direction {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }

    fn key(&self, s: &SState) -> (FixedBitSet, Vec<u64>) {
        let mut atoms = s.atoms.clone();
        if self.use_dominance {
            for (i, &m) in self.g.til_mask.iter().enumerate() {
                if m {
                    atoms.set(i, false);
                }
            }
        }
        (atoms, s.fluents.iter().map(|f| f.to_bits()).collect())
    }

    /// True if an equivalent or dominating state was seen already.
    fn seen_before(&mut self, s: &SState) -> bool {
        let key = self.key(s);
        if self.use_dominance {
            match self.seen.get_mut(&key) {
                Some(t) if *t <= s.time => true,
                Some(t) => {
                    *t = s.time;
                    false
                }
                None => {
                    self.seen.insert(key, s.time);
                    false
                }
            }
        } else {
            self.seen_exact.insert((key.0, key.1, s.time), ()).is_some()
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.exhausted {
            return true;
        }
        if self.stats.expanded >= self.cfg.node_budget
            || (self.stats.expanded.is_multiple_of(512)
                && self.clock.elapsed() >= Duration::from_millis(self.cfg.time_budget_ms))
        {
            self.exhausted = true;
        }
        self.exhausted
    }

    fn record(&mut self, s: &SState, path: &[PlanStep]) {
        let Some(v) = self.metric(s) else { return };
        if self.best.as_ref().is_none_or(|(b, _)| self.better(v, *b)) {
            self.best = Some((v, path.to_vec()));
        }
    }

    fn dfs(&mut self, s: SState, path: &mut Vec<PlanStep>) {
        if self.out_of_budget() {
            return;
        }
        if self.is_goal(&s) {
            self.record(&s, path);
            if self.time_metric {
                return;
            }
        }
        self.stats.expanded += 1;
        for (step, n) in self.successors(&s) {
            self.stats.generated += 1;
            if self.time_metric {
                if let Some((b, _)) = &self.best {
                    if self.elapsed(n.time) >= *b {
                        self.stats.pruned_bound += 1;
                        continue;
                    }
                }
            }
            if self.seen_before(&n) {
                self.stats.pruned_dominated += 1;
                continue;
            }
            path.push(step);
            self.dfs(n, path);
            path.pop();
            if self.exhausted {
                return;
            }
        }
    }

    fn best_first(&mut self, root: SState) {
        struct Node {
            state: SState,
            parent: Option<usize>,
            step: Option<PlanStep>,
        }
        let mut nodes = vec![Node { state: root, parent: None, step: None }];
        let mut open = BinaryHeap::new();
        let g = self.g;
        let unsat = |s: &SState| g.goals.iter().filter(|&&i| !s.atoms.contains(i)).count();
        open.push(Reverse((unsat(&nodes[0].state), 0, 0usize)));
        while let Some(Reverse((_, _, id))) = open.pop() {
            if self.out_of_budget() {
                return;
            }
            if self.is_goal(&nodes[id].state) {
                let mut path = Vec::new();
                let mut cur = Some(id);
                while let Some(c) = cur {
                    path.extend(nodes[c].step.clone());
                    cur = nodes[c].parent;
                }
                path.reverse();
                let s = nodes[id].state.clone();
                self.record(&s, &path);
                return;
            }
            self.stats.expanded += 1;
            for (step, n) in self.successors(&nodes[id].state.clone()) {
                self.stats.generated += 1;
                if self.seen_before(&n) {
                    self.stats.pruned_dominated += 1;
                    continue;
                }
                let pri = (unsat(&n), n.time, nodes.len());
                nodes.push(Node { state: n, parent: Some(id), step: Some(step) });
                open.push(Reverse(pri));
            }
        }
    }

    pub(crate) fn run(mut self) -> (SearchResult, SearchStats) {
        let root = self.initial();
        self.seen_before(&root);
        match self.cfg.strategy {
            Strategy::Optimal => self.dfs(root, &mut Vec::new()),
            Strategy::Greedy => self.best_first(root),
        }
        let best = self.best.take().map(|(v, steps)| (Plan::new(steps), v));
        let result = match (self.exhausted, best) {
            (false, Some((p, v))) => SearchResult::Found(p, v),
            (false, None) => SearchResult::Unsolvable,
            (true, best) => SearchResult::Budget(best),
        };
        (result, self.stats)
    }
}
