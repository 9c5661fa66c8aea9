mod common;

use chmm::vq::{kmeans_fit, lloyd, Codebook, KMeansOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quantize_matches_exhaustive_scan(
        centers in prop::collection::vec(vec3(), 1..=25),
        queries in prop::collection::vec(vec3(), 1..20),
    ) {
        let cb = Codebook::new(centers.clone()).unwrap();
        for q in &queries {
            prop_assert_eq!(cb.quantize(q).unwrap(), common::nearest_center(&centers, q));
        }
    }

    #[test]
    fn lloyd_inertia_never_increases(
        points in prop::collection::vec(vec3(), 5..80),
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        prop_assume!(k <= points.len());
        let run = lloyd(&points, k, seed, 100);
        for w in run.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{:?}", run.inertia_history);
        }
    }
}

#[test]
fn thousand_random_vectors_against_random_codebooks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 1000 {
        let k = rng.random_range(1..=25);
        let centers: Vec<[f64; 3]> = (0..k)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        let cb = Codebook::new(centers.clone()).unwrap();
        for _ in 0..50 {
            let v = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            assert_eq!(cb.quantize(&v).unwrap(), common::nearest_center(&centers, &v));
            checked += 1;
        }
    }
}

#[test]
fn ties_go_to_the_lowest_index() {
    let cb = Codebook::new(vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
    assert_eq!(cb.quantize(&[0.0, 0.0, 0.0]).unwrap(), 0);
    let dup = Codebook::new(vec![[5.0, 5.0, 5.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
    assert_eq!(dup.quantize(&[0.1, 0.0, 0.0]).unwrap(), 1);
}

#[test]
fn fitted_codebook_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pts: Vec<[f64; 3]> = (0..300).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let a = kmeans_fit(&pts, 7, 42, &KMeansOptions::default()).unwrap();
    let b = kmeans_fit(&pts, 7, 42, &KMeansOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.k(), 7);
}
