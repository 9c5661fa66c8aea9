//! Grid-search the simple layer, calibrate the complex layer and save the
//! model. Pass `full` to search the whole N x M grid.

use chmm::gesture::{generate_dataset, DatasetSpec};
use chmm::training::{train_cascade, TrainConfig};

fn main() -> chmm::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let dataset = generate_dataset(&DatasetSpec::default())?;
    let mut config = TrainConfig::default().with_seed(0);
    if !full {
        config.grid.n_range = (3, 3);
        config.grid.m_range = (12, 17);
        config.grid.sessions = 1;
    }
    let outcome = train_cascade(&dataset, &config)?;
    outcome.write_summary(std::io::stdout())?;
    println!("grid cells: {} ({} skipped)", outcome.grid.cells.len(), outcome.grid.skipped_cells());

    let path = std::env::temp_dir().join("chmm-model.json");
    outcome.model.save(&path)?;
    println!("model written to {}", path.display());
    Ok(())
}
