use proptest::prelude::*;
use resource_games::games::sample_free_pairs;
use resource_games::linalg::{Complex64, HermitianOperator};
use resource_games::objects::{
    merge_tail_outcomes, random_instrument_set, random_povm_set, random_state, simulate, Strategy,
};
use resource_games::resources::{is_compatible, FreePOVMSetFamily, FreeStateSet, COMPATIBILITY_TOL};

/// Entry-by-entry evaluation of the simulation sum.
fn simulate_by_entries(m: &resource_games::objects::POVMSet, s: &Strategy, tau: usize, out: usize) -> Vec<Vec<Vec<Complex64>>> {
    let d = m.dim();
    let mut res = vec![vec![vec![Complex64::new(0.0, 0.0); d * d]; out]; tau];
    for y in 0..tau {
        for b in 0..out {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for z in 0..s.q.len() {
                        for x in 0..m.settings() {
                            for a in 0..m.outcomes() {
                                acc += m.effect(x, a).matrix()[(i, j)] * (s.q[z] * s.r[z][y][x] * s.s[z][y][a][b]);
                            }
                        }
                    }
                    res[y][b][i * d + j] = acc;
                }
            }
        }
    }
    res
}

#[test]
fn simulate_matches_entrywise_sum() {
    for seed in 0..20 {
        let m = random_povm_set(2, 3, 2, seed);
        let s = Strategy::random(3, 2, 3, 2, 3, seed + 100);
        let n = simulate(&m, &s, 2, 3).unwrap();
        let oracle = simulate_by_entries(&m, &s, 2, 3);
        for y in 0..2 {
            for b in 0..3 {
                let e = n.effect(y, b).matrix();
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((e[(i, j)] - oracle[y][b][i * 2 + j]).norm() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn merging_keeps_completeness() {
    let n = random_povm_set(3, 1, 5, 11);
    let merged = merge_tail_outcomes(&n, 3).unwrap();
    assert_eq!(merged.outcomes(), 3);
    for a in 0..2 {
        assert!(merged.effect(0, a).max_abs_diff(n.effect(0, a)) < 1e-15);
    }
    let total = (0..3).fold(HermitianOperator::zeros(3), |acc, a| acc.add(merged.effect(0, a)));
    assert!(total.max_abs_diff(&HermitianOperator::identity(3)) < 1e-9);
    assert!(merge_tail_outcomes(&n, 6).is_err());
}

#[test]
fn simulation_preserves_compatibility() {
    let pairs = sample_free_pairs(&FreeStateSet::MaxMixedCone, &FreePOVMSetFamily::Compatible, 2, 2, 2, 100, 5).unwrap();
    for (k, (_, m)) in pairs.iter().enumerate() {
        let s = Strategy::random(2, 2, 2, 2, 2, 1000 + k as u64);
        let n = simulate(m, &s, 2, 2).unwrap();
        let rep = is_compatible(&n, COMPATIBILITY_TOL).unwrap();
        assert!(rep.compatible, "sample {k}: residual {}", rep.residual);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn subchannels_are_linear(seed in 0u64..10_000, w in 0.0f64..1.0) {
        let inst = random_instrument_set(2, 1, 2, seed);
        let (r1, r2) = (random_state(2, seed + 1), random_state(2, seed + 2));
        let mix = r1.mix(w, &r2).unwrap();
        for g in inst.groups(0) {
            let lhs = g.map.apply(&mix).unwrap();
            let rhs = g.map.apply(&r1).unwrap().scale(w).add(&g.map.apply(&r2).unwrap().scale(1.0 - w));
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }

    #[test]
    fn composed_strategy_simulates_in_one_step(seed in 0u64..10_000) {
        let m = random_povm_set(2, 2, 3, seed);
        let inner = Strategy::random(2, 3, 2, 3, 2, seed + 1);
        let outer = Strategy::random(2, 2, 3, 2, 3, seed + 2);
        let two_step = simulate(&simulate(&m, &inner, 3, 2).unwrap(), &outer, 2, 3).unwrap();
        let one_step = simulate(&m, &inner.compose(&outer), 2, 3).unwrap();
        prop_assert!(two_step.max_abs_diff(&one_step) < 1e-10);
    }
}
