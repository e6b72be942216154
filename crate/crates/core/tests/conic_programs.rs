use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resource_games::conic::{solve, solve_from, verify_solution, Block, ConeSpec, ConicProgram, Settings, Status};

/// LP with a planted primal-dual pair satisfying complementarity, so the
/// optimal value is known in closed form.
fn planted_lp(seed: u64) -> (ConicProgram, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..10);
    let m = rng.random_range(1..n);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; n];
    for j in 0..n {
        if rng.random_bool(0.5) {
            x[j] = rng.random_range(0.1..2.0);
        } else {
            s[j] = rng.random_range(0.1..2.0);
        }
    }
    let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..m).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum()).collect();
    let c: Vec<f64> = (0..n).map(|j| (0..m).map(|i| a[(i, j)] * y[i]).sum::<f64>() + s[j]).collect();
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    let cone = ConeSpec::new(vec![Block::NonNeg(n)]).unwrap();
    (ConicProgram::new(cone, c, a, b).unwrap(), value)
}

#[test]
fn hundred_planted_lps_reach_their_optimum() {
    for seed in 0..100 {
        let (prog, value) = planted_lp(seed);
        let sol = solve(&prog, &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "seed {seed}");
        assert!(
            (sol.primal_value - value).abs() <= 1e-7 * value.abs().max(1.0),
            "seed {seed}: {} vs {value}",
            sol.primal_value
        );
        // weak duality for a minimization
        assert!(sol.dual_value <= sol.primal_value + 1e-9, "seed {seed}");
        let rep = verify_solution(&prog, &sol, 1e-8).unwrap();
        assert!(rep.passed(), "seed {seed}: {rep:?}");
    }
}

#[test]
fn warm_start_reproduces_value() {
    for seed in 0..20 {
        let (prog, _) = planted_lp(seed);
        let sol = solve(&prog, &Settings::default()).unwrap();
        let again = solve_from(&prog, &Settings::default(), Some(&sol.x)).unwrap();
        assert_eq!(again.status, Status::Optimal);
        assert!((again.primal_value - sol.primal_value).abs() <= 1e-8, "seed {seed}");
    }
}

#[test]
fn infeasible_scalar_has_certificate() {
    let cone = ConeSpec::new(vec![Block::NonNeg(1)]).unwrap();
    let prog = ConicProgram::new(cone, vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![-1.0]).unwrap();
    let sol = solve(&prog, &Settings::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
    let y = sol.certificate.expect("Farkas vector");
    // A'y <= 0 with b'y > 0 separates the empty feasible set
    assert!(y[0] < 0.0);
    assert!(-y[0] > 0.0);
}

#[test]
fn verify_flags_perturbations() {
    let cone = ConeSpec::new(vec![Block::NonNeg(1)]).unwrap();
    let prog = ConicProgram::new(cone, vec![1.0], DMatrix::from_element(1, 1, 1.0), vec![1.0]).unwrap();
    let sol = solve(&prog, &Settings::default()).unwrap();
    let rep = verify_solution(&prog, &sol, 1e-8).unwrap();
    assert!(rep.passed());
    assert!((rep.primal_value - 1.0).abs() < 1e-8);

    let mut bumped = sol.clone();
    bumped.x[0] += 1e-3;
    let rep = verify_solution(&prog, &bumped, 1e-8).unwrap();
    assert!((rep.primal_residual - 1e-3).abs() < 1e-8);
    assert!(!rep.primal_ok);

    let mut zeroed = sol.clone();
    zeroed.y.iter_mut().for_each(|v| *v = 0.0);
    let rep = verify_solution(&prog, &zeroed, 1e-8).unwrap();
    assert_eq!(rep.dual_value, 0.0);
    assert!((rep.gap - rep.primal_value).abs() < 1e-12);
}

#[test]
fn program_json_round_trip() {
    let (prog, _) = planted_lp(3);
    let back = ConicProgram::from_json(&prog.to_json()).unwrap();
    assert_eq!(back, prog);
}
