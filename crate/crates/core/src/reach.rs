//! State sets as characteristic functions, one-step image and preimage
//! over the positive-probability transition relation, masking, and the two
//! state-generalization operators used by symbolic RTDP.

use crate::diagram::{Diagram, Manager, StateAssignment, VarId, VarSet};
use crate::model::FactoredMdp;

/// Characteristic function `χ_C` of a set of states: a 0/1 diagram over the
/// unprimed variables.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct StateSet {
    pub chi: Diagram,
}

impl StateSet {
    pub fn empty(mgr: &Manager) -> Self {
        StateSet { chi: mgr.zero() }
    }

    pub fn full(mgr: &Manager) -> Self {
        StateSet { chi: mgr.one() }
    }

    pub fn is_empty(&self, mgr: &Manager) -> bool {
        self.chi == mgr.zero()
    }

    pub fn contains(&self, mgr: &Manager, s: &StateAssignment) -> bool {
        mgr.value_at(self.chi, s) == 1.0
    }

    pub fn count(&self, mgr: &Manager) -> f64 {
        mgr.count_states(self.chi)
    }

    /// Members in lexicographic order.
    pub fn states(&self, mgr: &mut Manager) -> Vec<StateAssignment> {
        mgr.enumerate_states(self.chi).expect("state sets are 0/1 over unprimed variables")
    }
}

fn minterm(mgr: &mut Manager, n: usize, s: &StateAssignment) -> Diagram {
    let mut acc = mgr.one();
    let zero = mgr.zero();
    for i in (0..n).rev() {
        let v = VarId::unprimed(i);
        acc = if s.get(i) {
            mgr.ite_node(v, acc, zero)
        } else {
            mgr.ite_node(v, zero, acc)
        }
        .expect("minterms are built bottom-up");
    }
    acc
}

/// Exact characteristic function of `states`.
pub fn chi_of(mgr: &mut Manager, n: usize, states: &[StateAssignment]) -> StateSet {
    let mut chi = mgr.zero();
    for s in states {
        let t = minterm(mgr, n, s);
        chi = mgr.or(chi, t);
    }
    StateSet { chi }
}

pub fn complement(mgr: &mut Manager, c: &StateSet) -> StateSet {
    StateSet { chi: mgr.not(c.chi) }
}

pub fn union(mgr: &mut Manager, a: &StateSet, b: &StateSet) -> StateSet {
    StateSet { chi: mgr.or(a.chi, b.chi) }
}

pub fn intersection(mgr: &mut Manager, a: &StateSet, b: &StateSet) -> StateSet {
    StateSet { chi: mgr.and(a.chi, b.chi) }
}

pub fn difference(mgr: &mut Manager, a: &StateSet, b: &StateSet) -> StateSet {
    StateSet { chi: mgr.diff(a.chi, b.chi) }
}

/// Successors of `c` along the 0/1 relation `rel(X, X')`.
pub fn image_under(mgr: &mut Manager, rel: Diagram, c: &StateSet) -> StateSet {
    let n = mgr.num_state_vars();
    let next = mgr.and_exists(c.chi, rel, VarSet::all_unprimed(n));
    StateSet { chi: mgr.swap_prime(next).expect("image ranges over primed variables") }
}

/// Predecessors of `c` along the 0/1 relation `rel(X, X')`.
pub fn preimage_under(mgr: &mut Manager, rel: Diagram, c: &StateSet) -> StateSet {
    let n = mgr.num_state_vars();
    let target = mgr.swap_prime(c.chi).expect("state sets range over unprimed variables");
    StateSet { chi: mgr.and_exists(rel, target, VarSet::all_primed(n)) }
}

/// States reachable in one step from `c` under some action with positive
/// probability.
pub fn img(mgr: &mut Manager, m: &FactoredMdp, c: &StateSet) -> StateSet {
    let rel = m.transition_relation(mgr);
    image_under(mgr, rel, c)
}

/// States that reach `c` in one step under some action with positive
/// probability.
pub fn preimg(mgr: &mut Manager, m: &FactoredMdp, c: &StateSet) -> StateSet {
    let rel = m.transition_relation(mgr);
    preimage_under(mgr, rel, c)
}

pub fn img_action(mgr: &mut Manager, m: &FactoredMdp, a: usize, c: &StateSet) -> StateSet {
    let rel = m.action_relation(mgr, a);
    image_under(mgr, rel, c)
}

pub fn preimg_action(mgr: &mut Manager, m: &FactoredMdp, a: usize, c: &StateSet) -> StateSet {
    let rel = m.action_relation(mgr, a);
    preimage_under(mgr, rel, c)
}

/// Forward reachability fixpoint from `c` (inclusive).
pub fn reachable_from(mgr: &mut Manager, m: &FactoredMdp, c: &StateSet) -> StateSet {
    let mut seen = *c;
    let mut frontier = *c;
    while !frontier.is_empty(mgr) {
        let next = img(mgr, m, &frontier);
        frontier = difference(mgr, &next, &seen);
        seen = union(mgr, &seen, &frontier);
    }
    seen
}

/// `f × χ_E`: `f` inside `E`, 0 outside.
pub fn mask(mgr: &mut Manager, f: Diagram, e: &StateSet) -> Diagram {
    mgr.mul(f, e.chi)
}

/// Masks a diagram over primed variables with `E` re-expressed on `X'`.
pub fn mask_primed(mgr: &mut Manager, f: Diagram, e: &StateSet) -> Diagram {
    let chi = mgr.swap_prime(e.chi).expect("state sets range over unprimed variables");
    mgr.mul(f, chi)
}

/// Default closeness radius: 1% of the value range of `v`.
pub fn default_delta(mgr: &Manager, v: Diagram) -> f64 {
    0.01 * (mgr.max_leaf(v) - mgr.min_leaf(v))
}

/// States whose value lies in `[V(s) - δ, V(s) + δ]`. `None` uses
/// [`default_delta`].
pub fn generalize_value(mgr: &mut Manager, s: &StateAssignment, v: Diagram, delta: Option<f64>) -> StateSet {
    let delta = delta.unwrap_or_else(|| default_delta(mgr, v));
    let center = mgr.value_at(v, s);
    let chi = mgr
        .threshold_to_bdd(v, center - delta, center + delta)
        .expect("delta must be non-negative");
    StateSet { chi }
}

/// `PreImg(Img({s})) − PreImg(S − Img({s}))`: states with at least one
/// successor and all successors inside the successor set of `s`.
pub fn generalize_reach(mgr: &mut Manager, m: &FactoredMdp, s: &StateAssignment) -> StateSet {
    let single = chi_of(mgr, m.num_vars(), &[*s]);
    let succ = img(mgr, m, &single);
    let into = preimg(mgr, m, &succ);
    let outside = complement(mgr, &succ);
    let leaks = preimg(mgr, m, &outside);
    difference(mgr, &into, &leaks)
}
