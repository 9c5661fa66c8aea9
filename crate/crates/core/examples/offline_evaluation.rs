//! Confusion matrices and macro metrics, for a hand-made table and for a
//! trained model on a fresh dataset.

use chmm::eval::ConfusionMatrix;
use chmm::gesture::{generate_dataset, DatasetSpec, GestureLabel};
use chmm::training::{evaluate_model, train_cascade, TrainConfig, DEFAULT_IDLE_FRACTION};

fn main() -> chmm::Result<()> {
    use GestureLabel::{Nodding, Shaking};
    let table = ConfusionMatrix::from_pairs(
        &[Shaking, Nodding],
        [
            (Shaking, Some(Shaking)),
            (Shaking, None),
            (Nodding, Some(Nodding)),
            (Nodding, Some(Shaking)),
        ],
    )?;
    table.write_report(std::io::stdout())?;

    let mut config = TrainConfig::default().with_seed(0);
    config.grid.n_range = (3, 3);
    config.grid.m_range = (12, 12);
    config.grid.sessions = 1;
    let model = train_cascade(&generate_dataset(&DatasetSpec::default())?, &config)?.model;
    let unseen = generate_dataset(&DatasetSpec {
        seed: 99,
        ..DatasetSpec::default()
    })?;
    println!();
    evaluate_model(&model, &unseen, DEFAULT_IDLE_FRACTION)?.write_report(std::io::stdout())
}
