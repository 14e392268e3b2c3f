//! Brute-force reference computations over explicitly enumerated states.
//! Transition probabilities come from direct CPT products and never touch
//! the diagram operations under test.

use thiserror::Error;

use crate::diagram::{Manager, StateAssignment};
use crate::model::FactoredMdp;

fn idx(s: &StateAssignment) -> usize {
    s.index() as usize
}

pub const MAX_ORACLE_VARS: usize = 16;
pub const ORACLE_RESIDUAL: f64 = 1e-12;
pub const ORACLE_MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{0} variables is too many to enumerate (limit {MAX_ORACLE_VARS})")]
    TooManyVariables(usize),
    #[error("tabular value iteration stalled at residual {0}")]
    NoConvergence(f64),
}

/// Explicit model: for each action and state index, the reward and the
/// positive-probability successors.
pub struct ExplicitMdp {
    pub n: usize,
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    pub successors: Vec<Vec<Vec<(usize, f64)>>>,
}

/// Successors of `s` under action `a` with their probabilities, in
/// lexicographic order; zero-probability states are omitted.
pub fn explicit_successors(mgr: &Manager, m: &FactoredMdp, a: usize, s: &StateAssignment) -> Vec<(StateAssignment, f64)> {
    let n = m.num_vars();
    let probs: Vec<f64> = m.action(a).cpts().iter().map(|&c| mgr.value_at(c, s)).collect();
    let mut out = Vec::new();
    for next in StateAssignment::all(n) {
        let p: f64 = (0..n).map(|i| if next.get(i) { probs[i] } else { 1.0 - probs[i] }).product();
        if p > 0.0 {
            out.push((next, p));
        }
    }
    out
}

pub fn enumerate(mgr: &Manager, m: &FactoredMdp) -> Result<ExplicitMdp, OracleError> {
    let n = m.num_vars();
    if n > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVariables(n));
    }
    let states: Vec<StateAssignment> = StateAssignment::all(n).collect();
    let mut rewards = Vec::new();
    let mut successors = Vec::new();
    for a in 0..m.num_actions() {
        rewards.push(states.iter().map(|s| mgr.value_at(m.action(a).reward(), s)).collect());
        successors.push(
            states
                .iter()
                .map(|s| explicit_successors(mgr, m, a, s).into_iter().map(|(t, p)| (idx(&t), p)).collect())
                .collect(),
        );
    }
    Ok(ExplicitMdp { n, gamma: m.gamma(), rewards, successors })
}

impl ExplicitMdp {
    pub fn num_states(&self) -> usize {
        1 << self.n
    }

    /// `Q[a][s]` for the value table `v`.
    pub fn q_table(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.rewards.len())
            .map(|a| {
                (0..self.num_states())
                    .map(|s| {
                        let future: f64 = self.successors[a][s].iter().map(|&(t, p)| p * v[t]).sum();
                        self.rewards[a][s] + self.gamma * future
                    })
                    .collect()
            })
            .collect()
    }

    /// One Bellman backup of the table `v`.
    pub fn backup(&self, v: &[f64]) -> Vec<f64> {
        let q = self.q_table(v);
        (0..self.num_states())
            .map(|s| q.iter().map(|row| row[s]).fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    /// Indexed by [`StateAssignment::index`].
    pub values: Vec<f64>,
    /// First maximizing action per state.
    pub policy: Vec<usize>,
    pub q: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl OracleSolution {
    pub fn value(&self, s: &StateAssignment) -> f64 {
        self.values[idx(s)]
    }
}

/// Tabular value iteration from zero until the residual is at most
/// [`ORACLE_RESIDUAL`].
pub fn oracle_value_iteration(mgr: &Manager, m: &FactoredMdp) -> Result<OracleSolution, OracleError> {
    let explicit = enumerate(mgr, m)?;
    let mut v = vec![0.0; explicit.num_states()];
    for it in 1..=ORACLE_MAX_ITERATIONS {
        let next = explicit.backup(&v);
        let residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if residual <= ORACLE_RESIDUAL {
            let q = explicit.q_table(&v);
            let policy = (0..explicit.num_states())
                .map(|s| {
                    let row: Vec<f64> = q.iter().map(|r| r[s]).collect();
                    crate::dp::argmax(&row)
                })
                .collect();
            return Ok(OracleSolution { values: v, policy, q, iterations: it });
        }
        if !residual.is_finite() {
            return Err(OracleError::NoConvergence(residual));
        }
    }
    Err(OracleError::NoConvergence(f64::NAN))
}

/// Brute-force `Img`: all states with a positive-probability predecessor
/// in `set` under some action.
pub fn explicit_img(mgr: &Manager, m: &FactoredMdp, set: &[StateAssignment]) -> Vec<StateAssignment> {
    let mut hit = vec![false; 1 << m.num_vars()];
    for s in set {
        for a in 0..m.num_actions() {
            for (t, _) in explicit_successors(mgr, m, a, s) {
                hit[idx(&t)] = true;
            }
        }
    }
    StateAssignment::all(m.num_vars()).filter(|t| hit[idx(t)]).collect()
}

/// Brute-force `PreImg`.
pub fn explicit_preimg(mgr: &Manager, m: &FactoredMdp, set: &[StateAssignment]) -> Vec<StateAssignment> {
    let n = m.num_vars();
    let mut target = vec![false; 1 << n];
    for s in set {
        target[idx(s)] = true;
    }
    StateAssignment::all(n)
        .filter(|s| (0..m.num_actions()).any(|a| explicit_successors(mgr, m, a, s).iter().any(|(t, _)| target[idx(t)])))
        .collect()
}

/// Brute-force reach generalization: states with a successor in
/// `Img({s})` and no successor outside it.
pub fn explicit_generalize_reach(mgr: &Manager, m: &FactoredMdp, s: &StateAssignment) -> Vec<StateAssignment> {
    let succ = explicit_img(mgr, m, &[*s]);
    let n = m.num_vars();
    let mut inside = vec![false; 1 << n];
    for t in &succ {
        inside[idx(t)] = true;
    }
    StateAssignment::all(n)
        .filter(|u| {
            let all: Vec<usize> = (0..m.num_actions())
                .flat_map(|a| explicit_successors(mgr, m, a, u))
                .map(|(t, _)| idx(&t))
                .collect();
            all.iter().any(|&t| inside[t]) && all.iter().all(|&t| inside[t])
        })
        .collect()
}
