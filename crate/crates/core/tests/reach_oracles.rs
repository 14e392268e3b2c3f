mod common;

use common::{all_states, random_add, random_states, rng, small_model, tiny_chain};
use symdp_core::diagram::StateAssignment;
use symdp_core::oracle::{explicit_generalize_reach, explicit_img, explicit_preimg, explicit_successors};
use symdp_core::reach::{self, chi_of, generalize_reach, generalize_value, img, img_action, preimg, StateSet};

#[test]
fn images_match_enumeration() {
    let mut r = rng(11);
    for seed in 0..100 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        let c = random_states(&mut r, n, 0.3);
        let set = chi_of(&mut mgr, n, &c);
        let fwd = img(&mut mgr, &m, &set);
        assert_eq!(fwd.states(&mut mgr), explicit_img(&mgr, &m, &c), "img, seed {seed}");
        let back = preimg(&mut mgr, &m, &set);
        assert_eq!(back.states(&mut mgr), explicit_preimg(&mgr, &m, &c), "preimg, seed {seed}");
        for a in 0..m.num_actions() {
            let mut want: Vec<StateAssignment> =
                c.iter().flat_map(|s| explicit_successors(&mgr, &m, a, s)).map(|(t, _)| t).collect();
            want.sort();
            want.dedup();
            assert_eq!(img_action(&mut mgr, &m, a, &set).states(&mut mgr), want);
        }
    }
}

#[test]
fn image_and_preimage_are_adjoint() {
    let mut r = rng(12);
    for seed in 0..100 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        let c = chi_of(&mut mgr, n, &random_states(&mut r, n, 0.2));
        let d = chi_of(&mut mgr, n, &random_states(&mut r, n, 0.2));
        let pre = preimg(&mut mgr, &m, &d);
        let left = reach::intersection(&mut mgr, &c, &pre);
        let post = img(&mut mgr, &m, &c);
        let right = reach::intersection(&mut mgr, &post, &d);
        assert_eq!(left.is_empty(&mgr), right.is_empty(&mgr), "seed {seed}");
    }
}

#[test]
fn reach_generalization_matches_enumeration() {
    for seed in 0..100 {
        let (mut mgr, m) = small_model(seed);
        let n = m.num_vars();
        for s in all_states(n) {
            let e = generalize_reach(&mut mgr, &m, &s);
            let members = e.states(&mut mgr);
            assert_eq!(members, explicit_generalize_reach(&mgr, &m, &s), "seed {seed} s {s}");
            assert!(e.contains(&mgr, &s));
            let succ = explicit_img(&mgr, &m, &[s]);
            for t in &members {
                let out = explicit_img(&mgr, &m, &[*t]);
                assert!(!out.is_empty());
                assert!(out.iter().all(|u| succ.contains(u)));
            }
        }
    }
}

#[test]
fn tiny_chain_reach_generalization_of_00() {
    let (mut mgr, m) = tiny_chain();
    let s: StateAssignment = "00".parse().unwrap();
    let e = generalize_reach(&mut mgr, &m, &s);
    assert_eq!(e.states(&mut mgr), vec![s]);
}

#[test]
fn value_generalization_is_the_delta_ball() {
    let mut r = rng(13);
    let leaves = [0.0, 0.3, 0.5, 0.55, 1.0, 2.0];
    for n in 1..=6 {
        for _ in 0..30 {
            let mut mgr = symdp_core::Manager::new(n).unwrap();
            let v = random_add(&mut mgr, &mut r, n, &leaves);
            for delta in [None, Some(0.0), Some(0.1), Some(0.5)] {
                for s in all_states(n) {
                    let e = generalize_value(&mut mgr, &s, v, delta);
                    let d = delta.unwrap_or_else(|| reach::default_delta(&mgr, v));
                    let center = mgr.value_at(v, &s);
                    assert!(e.contains(&mgr, &s));
                    for t in all_states(n) {
                        let close = (mgr.value_at(v, &t) - center).abs() <= d;
                        assert_eq!(e.contains(&mgr, &t), close);
                    }
                }
            }
        }
    }
}

#[test]
fn masks_partition_a_function() {
    let mut r = rng(14);
    for n in 1..=6 {
        let mut mgr = symdp_core::Manager::new(n).unwrap();
        for _ in 0..20 {
            let f = random_add(&mut mgr, &mut r, n, &[-1.0, 0.0, 0.7, 3.0]);
            let e = chi_of(&mut mgr, n, &random_states(&mut r, n, 0.5));
            let out = reach::complement(&mut mgr, &e);
            let inside = reach::mask(&mut mgr, f, &e);
            let outside = reach::mask(&mut mgr, f, &out);
            assert_eq!(mgr.add(inside, outside), f);
            let full = StateSet::full(&mgr);
            assert_eq!(reach::mask(&mut mgr, f, &full), f);
        }
    }
}
