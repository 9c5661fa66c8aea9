//! Score sequences with a left-right HMM and re-estimate it with Baum-Welch.

use chmm::hmm::{DiscreteHmm, TrainOptions};

fn main() -> chmm::Result<()> {
    let truth = DiscreteHmm::new(
        vec![vec![0.7, 0.3], vec![0.0, 1.0]],
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![1.0, 0.0],
    )?;
    for seq in [vec![0, 0, 1, 1], vec![1, 1, 1, 1], vec![0, 0, 0, 0]] {
        println!("ln P({seq:?}) = {:.4}", truth.log_likelihood(&seq)?);
    }

    let corpus = vec![vec![0, 0, 1, 1, 1], vec![0, 1, 1, 1, 1], vec![0, 0, 0, 1, 1], vec![0, 0, 1, 1, 0]];
    let start = DiscreteHmm::left_right(2, 2, 7)?;
    let (trained, report) = start.baum_welch(&corpus, &TrainOptions::default())?;
    println!(
        "Baum-Welch: {} iterations, converged={}, ln L {:.4} -> {:.4}",
        report.iterations_run,
        report.converged,
        report.log_likelihood_history.first().unwrap(),
        report.log_likelihood_history.last().unwrap()
    );
    println!("A = {:.3?}", trained.transition);
    println!("B = {:.3?}", trained.emission);
    Ok(())
}
