//! Shared pieces of the acceptance suite: random small models, random
//! diagrams, the paired t-test and a few log readers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use symdp_core::diagram::{Diagram, Manager, StateAssignment, VarId};
use symdp_core::model::{ActionSpec, FactoredMdp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random ADD over the unprimed variables `0..n`, leaves from `leaves`.
pub fn random_add(mgr: &mut Manager, rng: &mut ChaCha8Rng, n: usize, leaves: &[f64]) -> Diagram {
    fn go(mgr: &mut Manager, rng: &mut ChaCha8Rng, var: usize, n: usize, leaves: &[f64]) -> Diagram {
        if var == n || rng.random_bool(0.25) {
            return mgr.mk_const(leaves[rng.random_range(0..leaves.len())]).unwrap();
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

fn random_cpt(mgr: &mut Manager, rng: &mut ChaCha8Rng, n: usize, det: f64) -> Diagram {
    let k = rng.random_range(0..=n.min(2));
    let mut parents = rand::seq::index::sample(rng, n, k).into_vec();
    parents.sort_unstable();
    fn tree(mgr: &mut Manager, rng: &mut ChaCha8Rng, vars: &[usize], det: f64) -> Diagram {
        match vars.split_first() {
            None => {
                let p = if rng.random_bool(det) {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        0.0
                    }
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

/// Random model: each CPT is the identity with probability 0.4, otherwise a
/// tree over up to two parents whose leaves are 0/1 with probability `det`.
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

/// 1..=6 variables, 1..=4 actions, a mix of stochastic and deterministic
/// dynamics.
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

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean: f64,
    pub t: f64,
    /// One-sided p-value for `mean(x - y) > 0`.
    pub p: f64,
}

/// Paired t-test of `x > y`.
pub fn paired_one_sided(x: &[f64], y: &[f64]) -> PairedTest {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return PairedTest { n, mean, t: f64::NAN, p: f64::NAN };
    }
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = mean / (var / n as f64).sqrt();
    let p = if t.is_nan() {
        f64::NAN
    } else {
        1.0 - StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap().cdf(t)
    };
    PairedTest { n, mean, t, p }
}

/// First 1-based trial whose value is within `tol` of `target`.
pub fn first_within(values: &[f64], target: f64, tol: f64) -> Option<usize> {
    values.iter().position(|v| (v - target).abs() <= tol).map(|i| i + 1)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_test_matches_reference_values() {
        let x = [5.1, 4.9, 5.6, 5.8, 6.0, 5.2, 5.5];
        let y = [4.8, 5.0, 5.1, 5.2, 5.4, 5.0, 5.1];
        let r = paired_one_sided(&x, &y);
        assert!((r.t - 3.7688918072220488).abs() < 1e-9);
        assert!((r.p - 0.004650412598215153).abs() < 1e-9);
        let r = paired_one_sided(&[1.0, 2.0, 3.0], &[1.5, 2.1, 3.6]);
        assert!((r.t + 2.6186146828319092).abs() < 1e-9);
        assert!((r.p - 0.9399413450640599).abs() < 1e-9);
    }

    #[test]
    fn first_within_is_one_based() {
        assert_eq!(first_within(&[5.0, 3.0, 1.05], 1.0, 0.1), Some(3));
        assert_eq!(first_within(&[1.0], 1.0, 0.0), Some(1));
        assert_eq!(first_within(&[5.0], 1.0, 0.1), None);
    }

    #[test]
    fn small_models_are_valid() {
        for seed in 0..20 {
            let (mut mgr, m) = small_model(seed);
            assert!(symdp_core::validate_model(&mut mgr, &m).is_valid());
        }
    }
}
