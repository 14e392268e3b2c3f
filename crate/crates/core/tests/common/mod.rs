#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symdp_core::diagram::{Diagram, Manager, StateAssignment, VarId};
use symdp_core::fixtures::TINY_CHAIN;
use symdp_core::model::{parse_model, ActionSpec, FactoredMdp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_chain() -> (Manager, FactoredMdp) {
    parse_model(TINY_CHAIN).unwrap()
}

/// Random ADD over the unprimed variables `0..n` with leaves drawn from
/// `leaves`. Built by Shannon expansion so every variable may appear.
pub fn random_add(mgr: &mut Manager, rng: &mut ChaCha8Rng, n: usize, leaves: &[f64]) -> Diagram {
    fn go(mgr: &mut Manager, rng: &mut ChaCha8Rng, var: usize, n: usize, leaves: &[f64]) -> Diagram {
        if var == n || rng.random_bool(0.25) {
            let v = leaves[rng.random_range(0..leaves.len())];
            return mgr.mk_const(v).unwrap();
        }
        let hi = go(mgr, rng, var + 1, n, leaves);
        let lo = go(mgr, rng, var + 1, n, leaves);
        mgr.ite_var(VarId::unprimed(var), hi, lo).unwrap()
    }
    go(mgr, rng, 0, n, leaves)
}

pub fn random_bdd(mgr: &mut Manager, rng: &mut ChaCha8Rng, n: usize) -> Diagram {
    random_add(mgr, rng, n, &[0.0, 1.0])
}

/// CPT over a random parent subset. `det` is the chance that a leaf is 0 or
/// 1 instead of a value in 0.1..=0.9.
fn random_cpt(mgr: &mut Manager, rng: &mut ChaCha8Rng, n: usize, det: f64) -> Diagram {
    let k = rng.random_range(0..=n.min(2));
    let parents = rand::seq::index::sample(rng, n, k).into_vec();
    let mut parents = parents;
    parents.sort_unstable();
    fn tree(mgr: &mut Manager, rng: &mut ChaCha8Rng, vars: &[usize], det: f64) -> Diagram {
        match vars.split_first() {
            None => {
                let p = if rng.random_bool(det) {
                    if rng.random_bool(0.5) { 1.0 } else { 0.0 }
                } else {
                    rng.random_range(1..=9u32) as f64 / 10.0
                };
                mgr.mk_const(p).unwrap()
            }
            Some((&v, rest)) => {
                let hi = tree(mgr, rng, rest, det);
                let lo = tree(mgr, rng, rest, det);
                mgr.ite_var(VarId::unprimed(v), hi, lo).unwrap()
            }
        }
    }
    tree(mgr, rng, &parents, det)
}

/// Random model with `n` variables and `actions` actions. Each variable is
/// either persistent (identity CPT) or gets a random CPT.
pub fn random_model(seed: u64, n: usize, actions: usize, det: f64, gamma: f64) -> (Manager, FactoredMdp) {
    let mut rng = rng(seed);
    let mut mgr = Manager::new(n).unwrap();
    let mut specs = Vec::new();
    for a in 0..actions {
        let mut cpts = Vec::new();
        for i in 0..n {
            let cpt = if rng.random_bool(0.4) {
                mgr.mk_literal(VarId::unprimed(i)).unwrap()
            } else {
                random_cpt(&mut mgr, &mut rng, n, det)
            };
            cpts.push(cpt);
        }
        let reward = random_add(&mut mgr, &mut rng, n.min(3), &[0.0, 0.25, 0.5, 1.0]);
        specs.push(ActionSpec::new(&mut mgr, format!("a{a}"), cpts, reward).unwrap());
    }
    let names = (0..n).map(|i| format!("x{i}")).collect();
    let start = StateAssignment::from_index(n, rng.random_range(0..1u64 << n));
    let m = FactoredMdp::new(names, gamma, start, specs, None).unwrap();
    (mgr, m)
}

/// Seeded small model in the shapes the suites use: 1..=6 variables,
/// 1..=4 actions.
pub fn small_model(seed: u64) -> (Manager, FactoredMdp) {
    let mut r = rng(seed ^ 0x5eed);
    let n = r.random_range(1..=6);
    let actions = r.random_range(1..=4);
    let det = [0.0, 0.3, 0.7][r.random_range(0..3)];
    random_model(seed, n, actions, det, 0.9)
}

pub fn all_states(n: usize) -> Vec<StateAssignment> {
    StateAssignment::all(n).collect()
}

/// Random subset of the states as a sorted list.
pub fn random_states(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<StateAssignment> {
    all_states(n).into_iter().filter(|_| rng.random_bool(p)).collect()
}
