//! Planning while learning the transition model: add-one smoothed
//! maximum-likelihood CPT estimates under known parent structure, ε-greedy
//! exploration, and the adaptive trial loop.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::diagram::{Diagram, Manager, StateAssignment, VarId};
use crate::dp::{self, ValueFunction};
use crate::model::{maintain, FactoredMdp};
use crate::planners::{
    self, simulate_step, CpuClock, Generalization, PlannerError, SimRng, StepRecord, TrialLog, TrialRecord, TrialSchedule,
};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counter {
    pub successes: u64,
    pub total: u64,
}

impl Counter {
    /// `(N⁺ + 1) / (N + 2)`.
    pub fn estimate(self) -> f64 {
        (self.successes as f64 + 1.0) / (self.total as f64 + 2.0)
    }
}

#[derive(Clone, Debug)]
pub struct TransitionCounts {
    /// `[a][i]`: sorted parent variable indices.
    parents: Vec<Vec<Vec<usize>>>,
    /// `[a][i]`: CPT is the identity and taken as known.
    known: Vec<Vec<bool>>,
    table: Vec<Vec<FxHashMap<u64, Counter>>>,
}

impl TransitionCounts {
    /// Parent sets from the supports of the true CPTs. With
    /// `known_frames`, CPTs equal to `X'_i = X_i` are kept as given.
    pub fn from_structure(mgr: &mut Manager, m: &FactoredMdp, known_frames: bool) -> Self {
        let n = m.num_vars();
        let mut parents = Vec::new();
        let mut known = Vec::new();
        for a in m.actions() {
            let mut pa = Vec::with_capacity(n);
            let mut ka = Vec::with_capacity(n);
            for i in 0..n {
                let cpt = a.cpt(i);
                let mut vars: Vec<usize> = mgr.support(cpt).into_iter().map(|v| v.state_var()).collect();
                vars.sort_unstable();
                vars.dedup();
                pa.push(vars);
                let lit = mgr.mk_literal(VarId::unprimed(i)).expect("in range");
                ka.push(known_frames && cpt == lit);
            }
            parents.push(pa);
            known.push(ka);
        }
        let table = parents.iter().map(|pa| vec![FxHashMap::default(); pa.len()]).collect();
        TransitionCounts { parents, known, table }
    }

    pub fn parents(&self, a: usize, i: usize) -> &[usize] {
        &self.parents[a][i]
    }

    pub fn is_known(&self, a: usize, i: usize) -> bool {
        self.known[a][i]
    }

    fn key(parents: &[usize], s: &StateAssignment) -> u64 {
        parents.iter().enumerate().fold(0, |k, (j, &p)| k | (u64::from(s.get(p)) << j))
    }

    pub fn counter(&self, a: usize, i: usize, s: &StateAssignment) -> Counter {
        let key = Self::key(&self.parents[a][i], s);
        self.table[a][i].get(&key).copied().unwrap_or_default()
    }

    pub fn record_transition(&mut self, a: usize, s: &StateAssignment, next: &StateAssignment) {
        for i in 0..self.parents[a].len() {
            let key = Self::key(&self.parents[a][i], s);
            let c = self.table[a][i].entry(key).or_default();
            c.total += 1;
            if next.get(i) {
                c.successes += 1;
            }
        }
    }

    /// Smoothed estimate of `P(X'_i = true | parents(s))` under `a`.
    pub fn estimate(&self, a: usize, i: usize, s: &StateAssignment) -> f64 {
        self.counter(a, i, s).estimate()
    }

    /// Estimated CPT diagram over the parents of `(a, i)`.
    pub fn estimate_cpt(&self, mgr: &mut Manager, a: usize, i: usize) -> Diagram {
        fn build(mgr: &mut Manager, parents: &[usize], table: &FxHashMap<u64, Counter>, j: usize, key: u64) -> Diagram {
            if j == parents.len() {
                let c = table.get(&key).copied().unwrap_or_default();
                return mgr.mk_const(c.estimate()).expect("finite estimate");
            }
            let hi = build(mgr, parents, table, j + 1, key | (1 << j));
            let lo = build(mgr, parents, table, j + 1, key);
            mgr.ite_node(VarId::unprimed(parents[j]), hi, lo).expect("parents are sorted")
        }
        build(mgr, &self.parents[a][i], &self.table[a][i], 0, 0)
    }
}

/// Copy of `m_true` whose unknown CPTs are replaced by the current
/// estimates. Rewards stay those of the true model.
pub fn estimated_model(mgr: &mut Manager, counts: &TransitionCounts, m_true: &FactoredMdp) -> FactoredMdp {
    let mut m = m_true.clone();
    for a in 0..m.num_actions() {
        refresh_action(mgr, counts, &mut m, a);
    }
    m
}

/// Per-action estimated CPTs, identity CPTs included when known.
pub fn estimate_cpts(mgr: &mut Manager, counts: &TransitionCounts, m_true: &FactoredMdp) -> Vec<Vec<Diagram>> {
    (0..m_true.num_actions())
        .map(|a| {
            (0..m_true.num_vars())
                .map(|i| if counts.is_known(a, i) { m_true.action(a).cpt(i) } else { counts.estimate_cpt(mgr, a, i) })
                .collect()
        })
        .collect()
}

/// Rebuilds the unknown CPTs of action `a` in `est`.
pub fn refresh_action(mgr: &mut Manager, counts: &TransitionCounts, est: &mut FactoredMdp, a: usize) {
    for i in 0..est.num_vars() {
        if counts.is_known(a, i) {
            continue;
        }
        let cpt = counts.estimate_cpt(mgr, a, i);
        if cpt != est.action(a).cpt(i) {
            est.set_cpt(mgr, a, i, cpt).expect("smoothed estimates lie in (0, 1)");
        }
    }
}

/// With probability `epsilon` a uniform random action, else `greedy`.
/// Draws nothing when `epsilon` is 0.
pub fn explore(rng: &mut SimRng, epsilon: f64, greedy: usize, num_actions: usize) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..num_actions)
    } else {
        greedy
    }
}

/// ε-greedy action at `s` under the model `m_hat`.
pub fn epsilon_greedy(
    mgr: &Manager,
    m_hat: &FactoredMdp,
    v: ValueFunction,
    s: &StateAssignment,
    epsilon: f64,
    rng: &mut SimRng,
) -> usize {
    let (greedy, _) = dp::greedy_action(mgr, m_hat, v, s, None);
    explore(rng, epsilon, greedy, m_hat.num_actions())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveOptions {
    pub epsilon: f64,
    /// Constant initial value.
    pub initial_value: f64,
    /// Plan with the learned model; `false` plans with the true model.
    pub learn_model: bool,
    /// Treat identity CPTs as known rather than estimating them.
    pub known_frames: bool,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { epsilon: DEFAULT_EPSILON, initial_value: 0.0, learn_model: true, known_frames: true }
    }
}

pub struct AdaptiveResult {
    pub value: ValueFunction,
    pub log: TrialLog,
    pub counts: TransitionCounts,
    pub model: FactoredMdp,
}

/// Adaptive sRTDP with `mode`; [`Generalization::Single`] gives ARTDP.
pub fn run_asrtdp(
    mgr: &mut Manager,
    m_true: &FactoredMdp,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    epsilon: f64,
    rng: &mut SimRng,
    mode: Generalization,
) -> Result<(ValueFunction, TrialLog), PlannerError> {
    let opts = AdaptiveOptions { epsilon, ..AdaptiveOptions::default() };
    run_asrtdp_with(mgr, m_true, s0, schedule, rng, mode, opts).map(|r| (r.value, r.log))
}

pub fn run_asrtdp_with(
    mgr: &mut Manager,
    m_true: &FactoredMdp,
    s0: &StateAssignment,
    schedule: TrialSchedule,
    rng: &mut SimRng,
    mode: Generalization,
    opts: AdaptiveOptions,
) -> Result<AdaptiveResult, PlannerError> {
    let clock = CpuClock::start();
    let mut counts = TransitionCounts::from_structure(mgr, m_true, opts.known_frames);
    let mut est = if opts.learn_model { estimated_model(mgr, &counts, m_true) } else { m_true.clone() };
    let mut v = ValueFunction(mgr.mk_const(opts.initial_value).expect("finite initial value"));
    let mut log = TrialLog::default();
    for trial in 1..=schedule.trials {
        let mut s = *s0;
        let mut total = 0.0;
        for step in 1..=schedule.steps {
            let out = match mode {
                Generalization::Single => planners::single_update(mgr, &est, v, &s),
                _ => planners::symbolic_update(mgr, &est, v, &s, mode)?,
            };
            v = out.value;
            let a = explore(rng, opts.epsilon, out.greedy, est.num_actions());
            let (next, reward) = simulate_step(mgr, m_true, &s, a, rng);
            if opts.learn_model {
                counts.record_transition(a, &s, &next);
                refresh_action(mgr, &counts, &mut est, a);
            }
            total += reward;
            log.steps.push(StepRecord {
                trial,
                step,
                state: s,
                action: a,
                reward,
                value: v.at(mgr, &s),
                v_start: v.at(mgr, s0),
                updated: out.updated,
                cpu_ms: clock.elapsed_ms(),
            });
            s = next;
            maintain(mgr, &[m_true, &est], &[v.0]);
        }
        log.trials.push(TrialRecord { trial, cpu_ms: clock.elapsed_ms(), v_start: v.at(mgr, s0), reward: total });
    }
    Ok(AdaptiveResult { value: v, log, counts, model: est })
}
