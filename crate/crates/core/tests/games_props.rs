use resource_games::games::*;
use resource_games::linalg::{trace_inner, HermitianOperator};
use resource_games::objects::*;
use resource_games::resources::{is_compatible, FreePOVMSetFamily, FreeStateSet, COMPATIBILITY_TOL};

/// `t[y][x][a][b] = tr[M_{a|x} phi_{b|y}(rho)]` with every label listed.
fn label_table(game: &GameEnsemble, rho: &State, m: &POVMSet) -> Vec<Vec<Vec<Vec<f64>>>> {
    let inst = game.instruments();
    (0..inst.settings())
        .map(|y| {
            let outs: Vec<HermitianOperator> = inst
                .groups(y)
                .iter()
                .flat_map(|g| std::iter::repeat_n(g.map.apply(rho).unwrap(), g.multiplicity as usize))
                .collect();
            (0..m.settings())
                .map(|x| {
                    (0..m.outcomes())
                        .map(|a| outs.iter().map(|o| trace_inner(m.effect(x, a), o).unwrap()).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Best and worst value over every deterministic strategy.
fn enumerate(prior: &[f64], t: &[Vec<Vec<Vec<f64>>>]) -> (f64, f64) {
    let tau = t.len();
    let (kappa, l, labels) = (t[0].len(), t[0][0].len(), t[0][0][0].len());
    let n_x = kappa.pow(tau as u32);
    let n_g = labels.pow((l * tau) as u32);
    let (mut best, mut worst) = (f64::NEG_INFINITY, f64::INFINITY);
    for cx in 0..n_x {
        for cg in 0..n_g {
            let (mut cx_, mut cg_) = (cx, cg);
            let mut v = 0.0;
            for (y, p) in prior.iter().enumerate() {
                let x = cx_ % kappa;
                cx_ /= kappa;
                for a in 0..l {
                    let g = cg_ % labels;
                    cg_ /= labels;
                    v += p * t[y][x][a][g];
                }
            }
            best = best.max(v);
            worst = worst.min(v);
        }
    }
    (best, worst)
}

#[test]
fn deterministic_reduction_matches_enumeration() {
    for seed in 0..100u64 {
        let dims = [1 + seed % 3, 1 + (seed / 3) % 3, 1 + (seed / 9) % 3, 2 + (seed / 27) % 2];
        let (kappa, l, tau, m_out) = (dims[0] as usize, dims[1] as usize + 1, dims[2] as usize, dims[3] as usize);
        let l = l.min(3);
        let inst = random_instrument_set(2, tau, m_out, seed);
        let prior = {
            let raw: Vec<f64> = (0..tau).map(|y| 1.0 + y as f64 + (seed % 5) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let game = GameEnsemble::new(prior.clone(), inst).unwrap();
        let rho = random_state(2, seed + 1);
        let m = random_povm_set(2, kappa, l, seed + 2);
        let succ = succ_probability(&game, &rho, &m).unwrap();
        let err = err_probability(&game, &rho, &m).unwrap();
        let (best, worst) = enumerate(&prior, &label_table(&game, &rho, &m));
        assert!((succ.value - best).abs() <= 1e-10, "seed {seed}");
        assert!((err.value - worst).abs() <= 1e-10, "seed {seed}");
        let total: f64 = succ.per_setting_values.iter().zip(&prior).map(|(v, p)| v * p).sum();
        assert!((total - succ.value).abs() <= 1e-12);
        let opt = Strategy::from_deterministic(&succ.optimal_strategy, kappa, l, m_out);
        assert!((strategy_value(&game, &rho, &m, &opt).unwrap() - succ.value).abs() <= 1e-10);

        for k in 0..1000u64 {
            let s = Strategy::random(2, tau, kappa, l, m_out, seed * 10_000 + k);
            let v = strategy_value(&game, &rho, &m, &s).unwrap();
            assert!(v <= succ.value + 1e-10 && v >= err.value - 1e-10, "seed {seed}, strategy {k}");
        }
    }
}

#[test]
fn blind_guessing_is_feasible() {
    for seed in 0..20u64 {
        let inst = random_instrument_set(2, 2, 3, seed);
        let game = GameEnsemble::uniform(inst);
        let rho = random_state(2, seed);
        let m = random_povm_set(2, 2, 2, seed);
        let blind: Vec<f64> = (0..3)
            .map(|b| {
                (0..2)
                    .map(|y| 0.5 * game.instruments().groups(y)[b].map.apply(&rho).unwrap().trace())
                    .sum()
            })
            .collect();
        let hi = blind.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = blind.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(succ_probability(&game, &rho, &m).unwrap().value >= hi - 1e-12);
        assert!(err_probability(&game, &rho, &m).unwrap().value <= lo + 1e-12);
    }
}

#[test]
fn orthogonal_outputs_allow_perfect_exclusion() {
    let sc = |k: usize| {
        Subchannel::measure_prepare(HermitianOperator::identity(2).scale(0.5), State::basis(2, k).matrix().clone()).unwrap()
    };
    let inst = InstrumentSet::new(vec![vec![OutcomeGroup::single(sc(0)), OutcomeGroup::single(sc(1))]]).unwrap();
    let game = GameEnsemble::uniform(inst);
    let sharp = noisy_mub_pair(1.0).unwrap();
    assert!(err_probability(&game, &random_state(2, 1), &sharp).unwrap().value <= 1e-12);
}

#[test]
fn simulation_never_helps() {
    for seed in 0..30u64 {
        let game = GameEnsemble::uniform(random_instrument_set(2, 2, 2, seed));
        let rho = random_state(2, seed + 7);
        let m = random_povm_set(2, 2, 2, seed + 8);
        let n = simulate(&m, &Strategy::random(2, 2, 2, 2, 2, seed + 9), 2, 2).unwrap();
        let (sm, sn) = (succ_probability(&game, &rho, &m).unwrap(), succ_probability(&game, &rho, &n).unwrap());
        assert!(sn.value <= sm.value + 1e-9);
        let (em, en) = (err_probability(&game, &rho, &m).unwrap(), err_probability(&game, &rho, &n).unwrap());
        assert!(en.value >= em.value - 1e-9);
    }
}

fn fixture() -> (State, POVMSet) {
    (State::basis(2, 0), noisy_mub_pair(1.0).unwrap())
}

#[test]
fn built_games_are_channels_with_bounded_masses() {
    let (rho, m) = fixture();
    let (dg, dc) = build_disc_game(
        &rho,
        &m,
        &FreeStateSet::MaxMixedCone,
        &FreePOVMSetFamily::Compatible,
        &[0.5, 0.5],
        DEFAULT_J,
        &State::maximally_mixed(2),
    )
    .unwrap();
    let (eg, _) = build_excl_game(
        &State::diagonal(&[0.75, 0.25]).unwrap(),
        &m,
        &FreeStateSet::MaxMixedCone,
        &FreePOVMSetFamily::Compatible,
        &[0.5, 0.5],
        &[vec![0.5, 0.5], vec![0.5, 0.5]],
    )
    .unwrap();
    assert_eq!(dg.instruments().outcomes(), 2 + DEFAULT_J);
    assert!(dc.alpha > 0.0 && dc.alpha + 1.0 / DEFAULT_J as f64 <= 1.0 + 1e-9);
    for k in 0..50u64 {
        let eta = random_state(2, 300 + k);
        for y in 0..2 {
            assert!((dg.instruments().total_trace(y, eta.matrix()).unwrap() - 1.0).abs() <= 1e-9);
            assert!((eg.instruments().total_trace(y, eta.matrix()).unwrap() - 1.0).abs() <= 1e-9);
            assert!(witness_mass(dg.instruments(), y, &eta, 2).unwrap() <= 1.0 + 1e-9);
            assert!(witness_mass(eg.instruments(), y, &eta, 2).unwrap() <= 0.5 + 1e-9);
        }
    }
}

#[test]
fn free_pair_samples_are_free() {
    let mm = sample_free_pairs(&FreeStateSet::MaxMixedCone, &FreePOVMSetFamily::Compatible, 3, 2, 2, 10, 1).unwrap();
    for (s, m) in &mm {
        assert!(s.matrix().max_abs_diff(State::maximally_mixed(3).matrix()) <= 1e-12);
        assert!(is_compatible(m, COMPATIBILITY_TOL).unwrap().compatible);
    }
    let inc = sample_free_pairs(&FreeStateSet::Incoherent, &FreePOVMSetFamily::Compatible, 3, 2, 2, 10, 2).unwrap();
    for (s, _) in &inc {
        let h = s.matrix().matrix();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(h[(i, j)].norm() <= 1e-12);
                }
            }
        }
    }
    let again = sample_free_pairs(&FreeStateSet::Incoherent, &FreePOVMSetFamily::Compatible, 3, 2, 2, 10, 2).unwrap();
    assert_eq!(inc, again);
}

#[test]
fn result1_fixture_certificates() {
    let (rho, m) = fixture();
    let rep = verify_result1(
        &rho,
        &m,
        &FreeStateSet::MaxMixedCone,
        &FreePOVMSetFamily::Compatible,
        &VerifyOptions::default(),
    )
    .unwrap();
    assert!((rep.state_value - 1.0).abs() <= 1e-6);
    assert!((rep.target - 2.0 * (1.0 + rep.povm_set_value)).abs() <= 1e-6);
    assert!(rep.certificate_ok && rep.empirical_ok && rep.generic_ok);
    assert_eq!(rep.sample_values.len(), 201);
    assert!(rep.passed);
}

#[test]
fn result1_with_random_garbage_state() {
    let (rho, m) = fixture();
    let opts = VerifyOptions {
        chi: Some(random_state(2, 99)),
        n_samples: 50,
        n_games: 5,
        ..VerifyOptions::default()
    };
    let rep = verify_result1(&rho, &m, &FreeStateSet::MaxMixedCone, &FreePOVMSetFamily::Compatible, &opts).unwrap();
    assert!(rep.passed);
}

#[test]
fn result1_single_object_reduction() {
    let m = noisy_mub_pair(1.0).unwrap();
    let rep = verify_result1(
        &State::maximally_mixed(2),
        &m,
        &FreeStateSet::MaxMixedCone,
        &FreePOVMSetFamily::Compatible,
        &VerifyOptions::default(),
    )
    .unwrap();
    assert!(rep.state_value <= 1e-7);
    assert!((rep.target - (1.0 + rep.povm_set_value)).abs() <= 1e-6);
    assert!(rep.passed);
}

#[test]
fn result2_fixture_and_perfect_exclusion() {
    let m = noisy_mub_pair(1.0).unwrap();
    let fs = FreeStateSet::MaxMixedCone;
    let fm = FreePOVMSetFamily::Compatible;
    let rep = verify_result2(&State::diagonal(&[0.75, 0.25]).unwrap(), &m, &fs, &fm, &VerifyOptions::default()).unwrap();
    assert!((rep.state_value - 0.5).abs() <= 1e-6);
    assert!(rep.passed, "{rep:?}");
    let pure = verify_result2(&State::basis(2, 0), &m, &fs, &fm, &VerifyOptions::default()).unwrap();
    assert!(pure.target <= 1e-6);
    assert!(pure.numerator <= 1e-7);
}

#[test]
fn fully_free_inputs_are_rejected() {
    let rho = State::maximally_mixed(2);
    let m = noisy_mub_pair(0.5).unwrap();
    let fs = FreeStateSet::MaxMixedCone;
    let fm = FreePOVMSetFamily::Compatible;
    let opts = VerifyOptions::default();
    assert!(matches!(verify_result1(&rho, &m, &fs, &fm, &opts), Err(GameError::FreeInputGame)));
    assert!(matches!(verify_result2(&rho, &m, &fs, &fm, &opts), Err(GameError::FreeInputGame)));
}
