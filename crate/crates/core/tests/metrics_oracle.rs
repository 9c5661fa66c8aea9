mod common;

use chmm::eval::{estimate_latency, ConfusionMatrix};
use chmm::gesture::GestureLabel;
use proptest::prelude::*;

const CLASSES: [GestureLabel; 3] = [GestureLabel::BeingIdle, GestureLabel::RotatingLeft, GestureLabel::RotatingRight];

fn from_counts(counts: &[[u64; 3]; 3], rejected: &[u64; 3]) -> (ConfusionMatrix, Vec<(usize, Option<usize>)>) {
    let mut pairs = Vec::new();
    for t in 0..3 {
        for (p, &n) in counts[t].iter().enumerate() {
            pairs.extend(std::iter::repeat_n((t, Some(p)), n as usize));
        }
        pairs.extend(std::iter::repeat_n((t, None), rejected[t] as usize));
    }
    let m = ConfusionMatrix::from_pairs(&CLASSES, pairs.iter().map(|&(t, p)| (CLASSES[t], p.map(|p| CLASSES[p])))).unwrap();
    (m, pairs)
}

#[test]
fn two_by_two_hand_computed() {
    use GestureLabel::{Nodding, Shaking};
    let pairs = [
        (Shaking, Some(Shaking)),
        (Shaking, Some(Shaking)),
        (Shaking, Some(Nodding)),
        (Nodding, Some(Nodding)),
        (Nodding, Some(Nodding)),
        (Nodding, Some(Nodding)),
    ];
    let m = ConfusionMatrix::from_pairs(&[Shaking, Nodding], pairs).unwrap();
    let r = m.macro_metrics().unwrap();
    assert!((r.precision - 0.875).abs() <= 1e-9);
    assert!((r.recall - 5.0 / 6.0).abs() <= 1e-9);
    assert!((r.average_accuracy - 5.0 / 6.0).abs() <= 1e-9);
}

#[test]
fn fifty_random_three_by_three() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let mut counts = [[0u64; 3]; 3];
        for row in counts.iter_mut() {
            for c in row.iter_mut() {
                *c = rng.random_range(0..20);
            }
        }
        counts[0][0] += 1;
        let (m, pairs) = from_counts(&counts, &[0; 3]);
        let r = m.macro_metrics().unwrap();
        let (p, rc, a) = common::per_class_macro(&pairs, 3);
        assert!((r.precision - p).abs() <= 1e-12);
        assert!((r.recall - rc).abs() <= 1e-12);
        assert!((r.average_accuracy - a).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn metrics_match_oracle_with_rejections(
        counts in prop::array::uniform3(prop::array::uniform3(0u64..15)),
        rejected in prop::array::uniform3(0u64..5),
    ) {
        let (m, pairs) = from_counts(&counts, &rejected);
        prop_assume!(!pairs.is_empty());
        let r = m.macro_metrics().unwrap();
        let (p, rc, a) = common::per_class_macro(&pairs, 3);
        prop_assert!((r.precision - p).abs() <= 1e-12);
        prop_assert!((r.recall - rc).abs() <= 1e-12);
        prop_assert!((r.average_accuracy - a).abs() <= 1e-12);
        for v in [r.precision, r.recall, r.average_accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn latency_reference_values() {
    assert!((estimate_latency(100, 116, 75.0).unwrap() - 0.213).abs() <= 0.0005);
    assert!((estimate_latency(0, 52, 75.0).unwrap() - 0.693).abs() <= 0.0005);
    assert_eq!(estimate_latency(10, 10, 75.0).unwrap(), 0.0);
    assert!(estimate_latency(11, 10, 75.0).is_err());
}
