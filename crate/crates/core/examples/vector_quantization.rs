//! Build a K-Means codebook from angular velocities and quantize samples.

use chmm::gesture::{generate_dataset, DatasetSpec};
use chmm::vq::{kmeans_fit, KMeansOptions};

fn main() -> chmm::Result<()> {
    let dataset = generate_dataset(&DatasetSpec {
        participants: 4,
        ..DatasetSpec::default()
    })?;
    let vectors = dataset.all_vectors();
    let codebook = kmeans_fit(&vectors, 9, 1, &KMeansOptions::default())?;
    println!("{} vectors, inertia {:.3}", vectors.len(), codebook.inertia);
    for (i, c) in codebook.centers.iter().enumerate() {
        println!("  symbol {i}: [{:+.3}, {:+.3}, {:+.3}]", c[0], c[1], c[2]);
    }
    for omega in [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, -1.5, 0.0], [0.0, 0.0, 1.0]] {
        println!("{omega:?} -> {}", codebook.quantize(&omega)?);
    }
    Ok(())
}
