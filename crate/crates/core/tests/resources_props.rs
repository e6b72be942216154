use resource_games::conic::{solve, Block, ProgramBuilder, Settings, Status, VarBlock};
use resource_games::games::sample_free_pairs;
use resource_games::linalg::{lambda_max, lambda_min, HermitianOperator};
use resource_games::objects::{
    hermitian_basis, noisy_mub_pair, random_povm_set, random_pure_state, random_state, simulate, POVMSet, State,
    Strategy,
};
use resource_games::resources::*;

fn assert_strong_duality(r: &QuantifierResult) {
    let d = &r.diagnostics;
    assert!((d.primal_value - d.dual_value).abs() <= 1e-6, "{d:?}");
    assert!(d.primal_residual <= 1e-7 && d.dual_residual <= 1e-7, "{d:?}");
}

fn state_witness_checks(r: &QuantifierResult, rho: &State, free: &FreeStateSet) {
    let n = normalize_witness(r, free).unwrap();
    assert!(n.witness.min_eig().unwrap() >= -1e-7);
    let ext = if r.kind.is_robustness() { Extremum::Max } else { Extremum::Min };
    let mu = free_pairing(&n.witness, free, ext).unwrap();
    assert!((mu - 1.0).abs() <= 1e-7);
    let pairing = n.witness.pairing(&OperatorData::State(rho.matrix().clone())).unwrap();
    let expect = if r.kind.is_robustness() { 1.0 + r.value } else { 1.0 - r.value };
    assert!((pairing - expect).abs() <= 1e-6, "{pairing} vs {expect}");
}

#[test]
fn max_mixed_oracle_on_random_states() {
    for seed in 0..50u64 {
        let d = 2 + (seed % 2) as usize;
        let rho = random_state(d, seed);
        let free = FreeStateSet::MaxMixedCone;
        let r = robustness_state(&rho, &free).unwrap();
        let w = weight_state(&rho, &free).unwrap();
        let lmax = lambda_max(rho.matrix()).unwrap();
        let lmin = lambda_min(rho.matrix()).unwrap();
        assert!((r.value - (d as f64 * lmax - 1.0)).abs() <= 1e-6, "seed {seed}");
        assert!((w.value - (1.0 - d as f64 * lmin)).abs() <= 1e-6, "seed {seed}");
        for q in [&r, &w] {
            assert_strong_duality(q);
            state_witness_checks(q, &rho, &free);
        }
    }
}

#[test]
fn incoherent_oracle_on_pure_states() {
    for seed in 0..20u64 {
        let d = 2 + (seed % 2) as usize;
        let rho = random_pure_state(d, seed);
        let l1: f64 = (0..d).map(|i| rho.matrix().matrix()[(i, i)].re.max(0.0).sqrt()).sum();
        let r = robustness_state(&rho, &FreeStateSet::Incoherent).unwrap();
        assert!((r.value - (l1 * l1 - 1.0)).abs() <= 1e-5, "seed {seed}: {} vs {}", r.value, l1 * l1 - 1.0);
        assert_strong_duality(&r);
        state_witness_checks(&r, &rho, &FreeStateSet::Incoherent);
    }
}

#[test]
fn decompositions_reconstruct_the_state() {
    for seed in 0..10u64 {
        let rho = random_state(3, seed);
        for free in [FreeStateSet::MaxMixedCone, FreeStateSet::Incoherent] {
            let r = robustness_state(&rho, &free).unwrap();
            let sigma = r.free_object.as_state().unwrap();
            let g = r.general_object.as_ref().unwrap().as_state().unwrap();
            let lhs = rho.matrix().add_scaled(r.value, g);
            assert!(lhs.max_abs_diff(&sigma.scale(1.0 + r.value)) <= 1e-7);

            let w = weight_state(&rho, &free).unwrap();
            let sigma = w.free_object.as_state().unwrap();
            let rebuilt = match &w.general_object {
                Some(g) => sigma.scale(1.0 - w.value).add_scaled(w.value, g.as_state().unwrap()),
                None => sigma.scale(1.0 - w.value),
            };
            assert!(rebuilt.max_abs_diff(rho.matrix()) <= 1e-7);
        }
    }
}

#[test]
fn free_objects_have_zero_resource() {
    let pairs = sample_free_pairs(&FreeStateSet::Incoherent, &FreePOVMSetFamily::Compatible, 2, 2, 2, 50, 17).unwrap();
    for (s, m) in &pairs {
        assert!(robustness_state(s, &FreeStateSet::Incoherent).unwrap().value <= 1e-7);
        assert!(weight_state(s, &FreeStateSet::Incoherent).unwrap().value <= 1e-7);
        assert!(robustness_povmset(m, &FreePOVMSetFamily::Compatible).unwrap().value <= 1e-7);
        assert!(weight_povmset(m, &FreePOVMSetFamily::Compatible).unwrap().value <= 1e-7);
    }
}

#[test]
fn quantifiers_are_monotone_under_simulation() {
    let fam = FreePOVMSetFamily::Compatible;
    for seed in 0..50u64 {
        let m = random_povm_set(2, 2, 2, seed);
        let s = Strategy::random(2, 2, 2, 2, 2, seed + 500);
        let n = simulate(&m, &s, 2, 2).unwrap();
        let (rm, rn) = (robustness_povmset(&m, &fam).unwrap(), robustness_povmset(&n, &fam).unwrap());
        assert!(rn.value <= rm.value + 1e-7, "seed {seed}");
        let (wm, wn) = (weight_povmset(&m, &fam).unwrap(), weight_povmset(&n, &fam).unwrap());
        assert!(wn.value <= wm.value + 1e-7, "seed {seed}");
        for q in [&rm, &rn, &wm, &wn] {
            assert_strong_duality(q);
        }
    }
}

/// Smallest `e >= 0` with `sum_lambda D G_lambda + e I >= M` and
/// `sum G = t I`; zero exactly when `M` mixes into a compatible set at `t`.
fn mixture_defect(m: &POVMSet, t: f64) -> f64 {
    let model = CompatibilityModel::new(m.settings(), m.outcomes()).unwrap();
    let d = m.dim();
    let mut pb = ProgramBuilder::new();
    let parent: Vec<VarBlock> = (0..model.len()).map(|_| pb.psd(d)).collect();
    let e = pb.nonneg(1);
    pb.add_cost(e.at(0), 1.0);
    let id = HermitianOperator::identity(d);
    for x in 0..m.settings() {
        for a in 0..m.outcomes() {
            let s = pb.psd(d);
            let mut bw: Vec<(VarBlock, f64)> = (0..model.len())
                .filter(|&l| model.function(l)[x] == a)
                .map(|l| (parent[l], 1.0))
                .collect();
            bw.push((s, -1.0));
            pb.add_hermitian_eq(d, &bw, &[(e.at(0), &id)], m.effect(x, a));
        }
    }
    let bw: Vec<(VarBlock, f64)> = parent.iter().map(|g| (*g, 1.0)).collect();
    pb.add_hermitian_eq(d, &bw, &[], &id.scale(t));
    let sol = solve(&pb.build().unwrap(), &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol.primal_value
}

#[test]
fn mub_robustness_matches_feasibility_bisection() {
    let m = noisy_mub_pair(1.0).unwrap();
    let r = robustness_povmset(&m, &FreePOVMSetFamily::Compatible).unwrap();
    assert_strong_duality(&r);
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if mixture_defect(&m, mid) <= 1e-9 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((hi - 1.0 - r.value).abs() <= 1e-5, "bisection {} vs {}", hi - 1.0, r.value);
    assert!((r.value - (3.0 - 2.0 * 2f64.sqrt())).abs() <= 1e-6);

    let n = normalize_witness(&r, &FreePOVMSetFamily::Compatible).unwrap();
    assert!(n.witness.min_eig().unwrap() >= -1e-7);
    let mu = free_pairing(&n.witness, &FreePOVMSetFamily::Compatible, Extremum::Max).unwrap();
    assert!((mu - 1.0).abs() <= 1e-8);
    let pairing = n
        .witness
        .pairing(&OperatorData::PovmSet(m.effects().to_vec()))
        .unwrap();
    assert!((pairing - 1.0 - r.value).abs() <= 1e-6);
}

#[test]
fn normalization_is_idempotent_and_scale_free() {
    let m = noisy_mub_pair(0.9).unwrap();
    let fam = FreePOVMSetFamily::Compatible;
    let r = robustness_povmset(&m, &fam).unwrap();
    let once = normalize_witness(&r, &fam).unwrap();
    let twice = normalize_witness(&once, &fam).unwrap();
    let diff = |a: &OperatorData, b: &OperatorData| {
        a.as_povm_set()
            .unwrap()
            .iter()
            .flatten()
            .zip(b.as_povm_set().unwrap().iter().flatten())
            .map(|(x, y)| x.max_abs_diff(y))
            .fold(0.0, f64::max)
    };
    assert!(diff(&once.witness, &twice.witness) < 1e-9);
    let mut doubled = r.clone();
    doubled.witness = r.witness.scale(2.0);
    let renorm = normalize_witness(&doubled, &fam).unwrap();
    assert!(diff(&once.witness, &renorm.witness) < 1e-9);
}

#[test]
fn mub_weight_is_monotone_in_sharpness() {
    let mut prev = -1.0;
    for k in 0..=10 {
        let eta = k as f64 / 10.0;
        let w = weight_povmset(&noisy_mub_pair(eta).unwrap(), &FreePOVMSetFamily::Compatible).unwrap();
        assert_strong_duality(&w);
        assert!(w.value >= prev - 1e-7, "eta {eta}: {} after {prev}", w.value);
        prev = w.value;
    }
}

#[test]
fn single_setting_sets_are_free() {
    let m = random_povm_set(3, 1, 3, 4);
    assert!(is_compatible(&m, COMPATIBILITY_TOL).unwrap().compatible);
    assert!(weight_povmset(&m, &FreePOVMSetFamily::Compatible).unwrap().value <= 1e-7);
    let trivial = POVMSet::trivial(2, 2, 2);
    assert!(robustness_povmset(&trivial, &FreePOVMSetFamily::Compatible).unwrap().value <= 1e-7);
}

#[test]
fn compatibility_threshold_by_bisection() {
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        let rep = is_compatible(&noisy_mub_pair(mid).unwrap(), COMPATIBILITY_TOL).unwrap();
        if rep.compatible {
            assert!(rep.parent.is_some());
            lo = mid;
        } else {
            assert!(rep.witness.is_some());
            hi = mid;
        }
    }
    assert!((0.5 * (lo + hi) - 0.5f64.sqrt()).abs() <= 1e-3);
}

/// Deterministic responses plus stochastic ones, as a custom cone.
fn stochastic_family(d: usize, kappa: usize, l: usize, extra: &[Vec<Vec<f64>>]) -> FreePOVMSetFamily {
    let model = CompatibilityModel::new(kappa, l).unwrap();
    let mut responses: Vec<Vec<Vec<f64>>> = (0..model.len())
        .map(|lam| (0..kappa).map(|x| (0..l).map(|a| model.response(a, x, lam)).collect()).collect())
        .collect();
    responses.extend(extra.iter().cloned());
    let basis = hermitian_basis(d);
    let mut images = Vec::new();
    for p in &responses {
        for b in &basis {
            images.push((0..kappa).map(|x| (0..l).map(|a| b.scale(p[x][a])).collect()).collect());
        }
    }
    FreePOVMSetFamily::CustomConic(CustomPovmCone {
        blocks: vec![Block::Psd(d); responses.len()],
        images,
        generators: None,
    })
}

#[test]
fn stochastic_responses_do_not_change_robustness() {
    let extra = vec![
        vec![vec![0.3, 0.7], vec![0.6, 0.4]],
        vec![vec![0.5, 0.5], vec![0.1, 0.9]],
        vec![vec![0.8, 0.2], vec![0.25, 0.75]],
    ];
    let fam = stochastic_family(2, 2, 2, &extra);
    for eta in [0.6, 1.0] {
        let m = noisy_mub_pair(eta).unwrap();
        let a = robustness_povmset(&m, &FreePOVMSetFamily::Compatible).unwrap().value;
        let b = robustness_povmset(&m, &fam).unwrap().value;
        assert!((a - b).abs() <= 1e-8, "eta {eta}: {a} vs {b}");
    }
}
