//! Replay the sixteen-step protocol through a trained cascade and report
//! per-gesture latency. Pass `paced` to run at the tracker's real rate.

use chmm::gesture::{generate_dataset, DatasetSpec};
use chmm::harness::{protocol_recording, replay, ProtocolSpec};
use chmm::training::{train_cascade, TrainConfig};

fn main() -> chmm::Result<()> {
    let paced = std::env::args().any(|a| a == "paced");
    let mut config = TrainConfig::default().with_seed(0);
    config.grid.n_range = (3, 3);
    config.grid.m_range = (12, 12);
    config.grid.sessions = 1;
    let model = train_cascade(&generate_dataset(&DatasetSpec::default())?, &config)?.model;

    let recording = protocol_recording(&ProtocolSpec::default())?;
    let rate = if paced { 1.0 } else { f64::INFINITY };
    let report = replay(&model, &recording, rate, Some(&recording.performed()))?;
    for &i in &report.triggers {
        let e = &report.events[i];
        println!("frame {:>5}: {}", e.trigger_frame, e.label.name());
    }
    report.write_latency_csv("synthetic", std::io::stdout())?;
    println!(
        "{} frames in {:.2} s, slowest step {:.3} ms",
        report.frames_processed, report.wall_time_s, report.max_step_ms
    );
    Ok(())
}
