mod common;

use chmm::hmm::DiscreteHmm;
use proptest::prelude::*;

fn model_and_sequence() -> impl Strategy<Value = (DiscreteHmm, Vec<usize>)> {
    (1usize..=3, 1usize..=4, any::<u64>()).prop_flat_map(|(n, m, seed)| {
        let hmm = DiscreteHmm::left_right(n, m, seed).unwrap();
        (Just(hmm), prop::collection::vec(0..m, 1..=6))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn forward_matches_path_enumeration((hmm, obs) in model_and_sequence()) {
        let fast = hmm.log_likelihood(&obs).unwrap();
        let slow = common::brute_force_log_likelihood(&hmm, &obs);
        prop_assert!((fast - slow).abs() <= 1e-9, "forward {fast} vs enumeration {slow}");
    }

    #[test]
    fn scores_are_log_probabilities((hmm, obs) in model_and_sequence()) {
        let ll = hmm.log_likelihood(&obs).unwrap();
        prop_assert!(ll <= 1e-12);
    }
}

#[test]
fn impossible_sequence_is_negative_infinity() {
    let hmm = DiscreteHmm::new(
        vec![vec![0.5, 0.5], vec![0.0, 1.0]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![1.0, 0.0],
    )
    .unwrap();
    assert_eq!(hmm.log_likelihood(&[1]).unwrap(), f64::NEG_INFINITY);
    assert_eq!(common::brute_force_log_likelihood(&hmm, &[1]), f64::NEG_INFINITY);
    let ll = hmm.log_likelihood(&[0, 1, 1]).unwrap();
    assert!((ll - 0.5f64.ln()).abs() < 1e-12);
}
