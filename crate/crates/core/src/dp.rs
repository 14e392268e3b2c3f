//! Symbolic Bellman backups.
//!
//! The expectation `∃_{X'} P^a(X, X') · V(X')` is computed by multiplying
//! in one per-variable factor at a time and summing out its primed
//! variable right away, from the bottom of the order up. The scalar
//! single-state backup in [`single_state_q`] performs the same arithmetic
//! in the same order, so a symbolic backup masked to `{s}` and a scalar
//! backup at `s` agree bit for bit.

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::diagram::{Diagram, Manager, Node, StateAssignment, VarId, VarSet};
use crate::model::{maintain, FactoredMdp};
use crate::reach::{self, StateSet};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("masked backup needs a nonempty state set")]
    EmptyMask,
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("the admissible heuristic needs a discount below 1")]
    Undiscounted,
}

/// Value function over the unprimed variables.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ValueFunction(pub Diagram);

impl ValueFunction {
    pub fn diagram(self) -> Diagram {
        self.0
    }

    pub fn at(self, mgr: &Manager, s: &StateAssignment) -> f64 {
        mgr.value_at(self.0, s)
    }
}

/// One state set per action; pairwise disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub sets: Vec<StateSet>,
}

impl Policy {
    pub fn action_at(&self, mgr: &Manager, s: &StateAssignment) -> Option<usize> {
        self.sets.iter().position(|set| set.contains(mgr, s))
    }

    /// Union of all per-action sets.
    pub fn domain(&self, mgr: &mut Manager) -> StateSet {
        let mut acc = StateSet::empty(mgr);
        for set in &self.sets {
            acc = reach::union(mgr, &acc, set);
        }
        acc
    }
}

#[derive(Clone, Debug)]
pub struct Backup {
    pub value: ValueFunction,
    /// Q diagram per action.
    pub q: Vec<Diagram>,
}

#[derive(Clone, Debug)]
pub struct MaskedBackup {
    /// Backed-up values inside `E`, zero outside.
    pub value: ValueFunction,
    /// Q diagrams masked by `E`.
    pub q: Vec<Diagram>,
    /// `E'`: one-step successors of `E`.
    pub reach: StateSet,
}

/// `∃_{X'} Π_i P(X'_i | X) · next`. Frame variables are substituted in one
/// pass; the others are eliminated one factor at a time, bottom first.
fn expectation(mgr: &mut Manager, m: &FactoredMdp, a: usize, next: Diagram) -> Diagram {
    let action = m.action(a);
    let frame = action.frame();
    let mut acc = mgr.substitute_frame(next, frame);
    for i in (0..m.num_vars()).rev() {
        if frame.contains(VarId::primed(i)) {
            continue;
        }
        let prod = mgr.mul(acc, action.factor(i));
        let mut v = VarSet::empty();
        v.insert(VarId::primed(i));
        acc = mgr.sum_abstract(prod, v);
    }
    acc
}

fn q_diagram(mgr: &mut Manager, m: &FactoredMdp, a: usize, next: Diagram, mask: Option<&StateSet>) -> Diagram {
    let action = m.action(a);
    let future = expectation(mgr, m, a, next);
    let future = mgr.scale(future, m.gamma());
    match mask {
        // Masking after the expectation gives the same values on E and
        // keeps E's characteristic function out of the intermediates.
        Some(e) => {
            let future = mgr.mul(future, e.chi);
            let reward = mgr.mul(action.reward(), e.chi);
            mgr.add(reward, future)
        }
        None => mgr.add(action.reward(), future),
    }
}

fn fold_max(mgr: &mut Manager, q: &[Diagram]) -> Diagram {
    let mut best = q[0];
    for &d in &q[1..] {
        best = mgr.max(best, d);
    }
    best
}

/// `V'(X) = max_a { R^a(X) + γ ∃_{X'} P^a(X, X') · V(X') }` over all states.
pub fn spudd_backup(mgr: &mut Manager, m: &FactoredMdp, v: ValueFunction) -> Backup {
    let next = mgr.swap_prime(v.0).expect("value functions range over unprimed variables");
    let q: Vec<Diagram> = (0..m.num_actions()).map(|a| q_diagram(mgr, m, a, next, None)).collect();
    let value = ValueFunction(fold_max(mgr, &q));
    Backup { value, q }
}

/// Backup restricted to `E`, reading values only on `E' = Img(E)`.
pub fn masked_backup(mgr: &mut Manager, m: &FactoredMdp, v: ValueFunction, e: &StateSet) -> Result<MaskedBackup, DpError> {
    if e.is_empty(mgr) {
        return Err(DpError::EmptyMask);
    }
    let reach = reach::img(mgr, m, e);
    let masked_v = reach::mask(mgr, v.0, &reach);
    let next = mgr.swap_prime(masked_v).expect("value functions range over unprimed variables");
    let q: Vec<Diagram> = (0..m.num_actions()).map(|a| q_diagram(mgr, m, a, next, Some(e))).collect();
    let value = ValueFunction(fold_max(mgr, &q));
    Ok(MaskedBackup { value, q, reach })
}

/// `V_E + V_old · χ_{¬E}`.
pub fn merge_masked(mgr: &mut Manager, old: ValueFunction, masked: ValueFunction, e: &StateSet) -> ValueFunction {
    let outside = reach::complement(mgr, e);
    let kept = reach::mask(mgr, old.0, &outside);
    ValueFunction(mgr.add(masked.0, kept))
}

/// `E[V(s')]` for `s'` drawn from independent bits with `P(bit i) = probs[i]`.
/// Mirrors the elimination order of the symbolic backup.
fn expected_next_value(mgr: &Manager, v: Diagram, probs: &[f64]) -> f64 {
    fn walk(mgr: &Manager, node: Diagram, level: usize, probs: &[f64], memo: &mut FxHashMap<(Diagram, usize), f64>) -> f64 {
        if level == probs.len() {
            return mgr.leaf_value(node).expect("value functions range over the state variables");
        }
        if let Some(&x) = memo.get(&(node, level)) {
            return x;
        }
        let (hi, lo) = match mgr.node(node) {
            Node::Internal { var, hi, lo } if var == VarId::unprimed(level) => (hi, lo),
            _ => (node, node),
        };
        let p = probs[level];
        let x = walk(mgr, hi, level + 1, probs, memo) * p + walk(mgr, lo, level + 1, probs, memo) * (1.0 - p);
        memo.insert((node, level), x);
        x
    }
    let mut memo = FxHashMap::default();
    walk(mgr, v, 0, probs, &mut memo)
}

/// Per-variable success probabilities of action `a` at `s`.
pub fn next_bit_probabilities(mgr: &Manager, m: &FactoredMdp, a: usize, s: &StateAssignment) -> Vec<f64> {
    m.action(a).cpts().iter().map(|&c| mgr.value_at(c, s)).collect()
}

/// `Q_a(s) = R^a(s) + γ Σ_{s'} P^a(s, s') V(s')` for every action, by
/// direct evaluation.
pub fn single_state_q(mgr: &Manager, m: &FactoredMdp, v: ValueFunction, s: &StateAssignment) -> Vec<f64> {
    (0..m.num_actions())
        .map(|a| {
            let probs = next_bit_probabilities(mgr, m, a, s);
            let future = expected_next_value(mgr, v.0, &probs);
            mgr.value_at(m.action(a).reward(), s) + m.gamma() * future
        })
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy action at `s`, read from `q` when given, otherwise by direct
/// evaluation.
pub fn greedy_action(
    mgr: &Manager,
    m: &FactoredMdp,
    v: ValueFunction,
    s: &StateAssignment,
    q: Option<&[Diagram]>,
) -> (usize, Vec<f64>) {
    let values = match q {
        Some(q) => q.iter().map(|&d| mgr.value_at(d, s)).collect(),
        None => single_state_q(mgr, m, v, s),
    };
    (argmax(&values), values)
}

/// Value iteration from `v0` until the sup-norm change is at most `tol`.
pub fn value_iteration(mgr: &mut Manager, m: &FactoredMdp, v0: ValueFunction, tol: f64) -> Result<(ValueFunction, usize), DpError> {
    value_iteration_with(mgr, m, v0, tol, DEFAULT_MAX_ITERATIONS, |_, _, _, _| {})
}

/// [`value_iteration`] with an iteration cap and a per-iteration callback
/// `(manager, iteration, value, residual)`.
pub fn value_iteration_with(
    mgr: &mut Manager,
    m: &FactoredMdp,
    v0: ValueFunction,
    tol: f64,
    max_iterations: usize,
    mut observe: impl FnMut(&Manager, usize, ValueFunction, f64),
) -> Result<(ValueFunction, usize), DpError> {
    let mut v = v0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        let next = spudd_backup(mgr, m, v).value;
        let change = mgr.sub(next.0, v.0);
        residual = mgr.sup_norm(change);
        v = next;
        observe(mgr, it, v, residual);
        maintain(mgr, &[m], &[v.0, v0.0]);
        if residual <= tol {
            return Ok((v, it));
        }
    }
    Err(DpError::NoConvergence { iterations: max_iterations, residual })
}

/// Splits states by the first action attaining `max_a Q_a`.
pub fn policy_from_q(mgr: &mut Manager, q: &[Diagram], domain: &StateSet) -> Policy {
    let best = fold_max(mgr, q);
    let mut covered = StateSet::empty(mgr);
    let mut sets = Vec::with_capacity(q.len());
    for &qa in q {
        let gap = mgr.sub(qa, best);
        let attains = StateSet { chi: mgr.threshold_to_bdd(gap, 0.0, 0.0).expect("valid interval") };
        let attains = reach::intersection(mgr, &attains, domain);
        let mine = reach::difference(mgr, &attains, &covered);
        covered = reach::union(mgr, &covered, &mine);
        sets.push(mine);
    }
    Policy { sets }
}

/// Greedy policy with respect to `v` over the whole state space.
pub fn extract_policy(mgr: &mut Manager, m: &FactoredMdp, v: ValueFunction) -> Policy {
    let backup = spudd_backup(mgr, m, v);
    let full = StateSet::full(mgr);
    policy_from_q(mgr, &backup.q, &full)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum HeuristicMode {
    /// `r_max / (1 - γ)`, an upper bound on every discounted return.
    #[default]
    Bound,
    /// `r_max · γ / (1 - γ)`.
    Paper,
}

impl std::str::FromStr for HeuristicMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bound" => Ok(HeuristicMode::Bound),
            "paper" => Ok(HeuristicMode::Paper),
            _ => Err(format!("unknown heuristic mode `{s}` (expected bound or paper)")),
        }
    }
}

/// Constant initial value function built from the largest one-step reward.
pub fn admissible_heuristic(mgr: &mut Manager, m: &FactoredMdp, mode: HeuristicMode) -> Result<ValueFunction, DpError> {
    let gamma = m.gamma();
    if gamma >= 1.0 {
        return Err(DpError::Undiscounted);
    }
    let r_max = m
        .actions()
        .iter()
        .map(|a| mgr.max_leaf(a.reward()))
        .fold(f64::NEG_INFINITY, f64::max);
    let h = match mode {
        HeuristicMode::Bound => r_max / (1.0 - gamma),
        HeuristicMode::Paper => r_max * gamma / (1.0 - gamma),
    };
    Ok(ValueFunction(mgr.mk_const(h).expect("finite heuristic")))
}
