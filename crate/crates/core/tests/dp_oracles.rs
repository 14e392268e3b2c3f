mod common;

use common::{all_states, random_add, random_states, rng, small_model, tiny_chain};
use symdp_core::dp::{
    admissible_heuristic, extract_policy, masked_backup, merge_masked, spudd_backup, value_iteration_with, HeuristicMode,
    ValueFunction,
};
use symdp_core::oracle::{enumerate, oracle_value_iteration};
use symdp_core::reach::{chi_of, img};

const VALUES: [f64; 5] = [0.0, 0.5, 1.25, 3.0, 7.5];

#[test]
fn backup_matches_enumerative_bellman_update() {
    let mut r = rng(21);
    for seed in 0..60 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        let explicit = enumerate(&mgr, &m).unwrap();
        let v = ValueFunction(random_add(&mut mgr, &mut r, n, &VALUES));
        let table: Vec<f64> = all_states(n).iter().map(|s| v.at(&mgr, s)).collect();
        let want = explicit.backup(&table);
        let want_q = explicit.q_table(&table);
        let got = spudd_backup(&mut mgr, &m, v);
        for s in all_states(n) {
            let k = s.index() as usize;
            assert!((got.value.at(&mgr, &s) - want[k]).abs() <= 1e-12, "seed {seed} s {s}");
            for (q, want_a) in got.q.iter().zip(&want_q) {
                assert!((mgr.value_at(*q, &s) - want_a[k]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn masked_backup_agrees_on_e_and_vanishes_off_it() {
    let mut r = rng(22);
    for seed in 0..200 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        let v = ValueFunction(random_add(&mut mgr, &mut r, n, &VALUES));
        let e = chi_of(&mut mgr, n, &random_states(&mut r, n, 0.4));
        if e.is_empty(&mgr) {
            assert!(masked_backup(&mut mgr, &m, v, &e).is_err());
            continue;
        }
        let full = spudd_backup(&mut mgr, &m, v);
        let masked = masked_backup(&mut mgr, &m, v, &e).unwrap();
        for s in all_states(n) {
            let got = masked.value.at(&mgr, &s);
            if e.contains(&mgr, &s) {
                assert!((got - full.value.at(&mgr, &s)).abs() <= 1e-12, "seed {seed} s {s}");
            } else {
                assert_eq!(got, 0.0, "seed {seed} s {s}");
            }
        }
        assert_eq!(masked.reach, img(&mut mgr, &m, &e));

        let merged = merge_masked(&mut mgr, v, masked.value, &e);
        for s in all_states(n) {
            let want = if e.contains(&mgr, &s) { masked.value.at(&mgr, &s) } else { v.at(&mgr, &s) };
            assert_eq!(merged.at(&mgr, &s), want);
        }
    }
}

#[test]
fn value_iteration_from_the_heuristic_decreases_monotonically() {
    for seed in 0..30 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        let h = admissible_heuristic(&mut mgr, &m, HeuristicMode::Bound).unwrap();
        let mut prev: Vec<f64> = all_states(n).iter().map(|s| h.at(&mgr, s)).collect();
        let oracle = oracle_value_iteration(&mgr, &m).unwrap();
        value_iteration_with(&mut mgr, &m, h, 1e-6, 100_000, |mgr, _, v, _| {
            for (k, s) in all_states(n).iter().enumerate() {
                let x = v.at(mgr, s);
                assert!(x <= prev[k] + 1e-12, "seed {seed}: V rose at {s}");
                assert!(x >= oracle.values[k] - 1e-9, "seed {seed}: V fell below V* at {s}");
                prev[k] = x;
            }
        })
        .unwrap();
    }
}

#[test]
fn policies_are_reproducible() {
    let (mut mgr, m) = tiny_chain();
    let h = admissible_heuristic(&mut mgr, &m, HeuristicMode::Bound).unwrap();
    let (v, _) = value_iteration_with(&mut mgr, &m, h, 1e-9, 100_000, |_, _, _, _| {}).unwrap();
    let p1 = extract_policy(&mut mgr, &m, v);
    let p2 = extract_policy(&mut mgr, &m, v);
    assert_eq!(p1, p2);
    for seed in 0..20 {
        let (mut mgr, m) = small_model(seed);
        let (mut mgr2, m2) = small_model(seed);
        let h = admissible_heuristic(&mut mgr, &m, HeuristicMode::Bound).unwrap();
        let h2 = admissible_heuristic(&mut mgr2, &m2, HeuristicMode::Bound).unwrap();
        let (v, _) = value_iteration_with(&mut mgr, &m, h, 1e-6, 100_000, |_, _, _, _| {}).unwrap();
        let (v2, _) = value_iteration_with(&mut mgr2, &m2, h2, 1e-6, 100_000, |_, _, _, _| {}).unwrap();
        let p = extract_policy(&mut mgr, &m, v);
        let p2 = extract_policy(&mut mgr2, &m2, v2);
        for s in all_states(m.num_vars()) {
            assert_eq!(p.action_at(&mgr, &s), p2.action_at(&mgr2, &s));
        }
    }
}
