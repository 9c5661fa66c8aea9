//! Generate the synthetic gesture corpus and round-trip it through a file.

use chmm::gesture::{generate_dataset, load_dataset, save_dataset, DatasetSpec, GestureLabel};

fn main() -> chmm::Result<()> {
    let dataset = generate_dataset(&DatasetSpec::default())?;
    for label in GestureLabel::ALL {
        let items: Vec<_> = dataset.with_label(label).collect();
        let mean_s = items.iter().map(|g| g.motion.duration_s()).sum::<f64>() / items.len() as f64;
        println!("{:>2} {:<16} {:>3} recordings, mean {:.2} s", label.value(), label.name(), items.len(), mean_s);
    }

    let dir = std::env::temp_dir().join("chmm-example");
    std::fs::create_dir_all(&dir).map_err(|e| chmm::Error::io(&dir, e))?;
    let path = dir.join("dataset.txt");
    save_dataset(&dataset, &path)?;
    let back = load_dataset(&path)?;
    println!("saved and reloaded {} recordings: identical = {}", back.len(), back == dataset);
    Ok(())
}
