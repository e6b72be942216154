use proptest::prelude::*;
use resource_games::linalg::{is_psd, trace_inner, HermitianOperator};
use resource_games::objects::random_state;

fn arb_psd(d: usize) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |v| {
        let h = HermitianOperator::from_svec(d, &v).unwrap();
        // h^2 is PSD
        HermitianOperator::new(h.matrix().matmul(h.matrix())).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn psd_operators_pair_nonnegatively_with_states(h in arb_psd(3), seed in 0u64..1_000_000) {
        prop_assume!(is_psd(&h, 0.0).unwrap());
        for k in 0..125 {
            let rho = random_state(3, seed * 1000 + k);
            prop_assert!(trace_inner(&h, rho.matrix()).unwrap() >= -1e-10);
        }
    }
}
