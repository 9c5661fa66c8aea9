use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use chmm::cascade::CascadeModel;
use chmm::error::{Error, Result};
use chmm::gesture::{generate_dataset, load_dataset, save_dataset, DatasetSpec, GestureLabel};
use chmm::harness::{protocol_recording, replay, serve, ProtocolSpec, Recording};
use chmm::training::{evaluate_model, train_cascade, TrainConfig, DEFAULT_IDLE_FRACTION};

#[derive(Parser)]
#[command(name = "chmm", version, about = "Cascaded HMM head gesture recognizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled dataset.
    Generate {
        #[arg(long, default_value_t = 19)]
        participants: usize,
        #[arg(long, default_value_t = 2)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Write the sixteen-step latency protocol instead of a training set.
        #[arg(long)]
        protocol: bool,
    },
    /// Grid-search and train a cascade model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2)]
        n_min: usize,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 7)]
        m_min: usize,
        #[arg(long, default_value_t = 25)]
        m_max: usize,
        #[arg(long, default_value_t = 5)]
        sessions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Grid accuracy table.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Offline precision, recall and accuracy of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Stream a dataset through the cascade in real time and measure latency.
    Replay {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Playback speed relative to the recording's sample rate; `inf`
        /// runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Expected performed gestures in order, comma separated.
        #[arg(long)]
        script: Option<String>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Serve line-delimited samples over TCP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 7878)]
        port: u16,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_script(text: &str) -> Result<Vec<GestureLabel>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            participants,
            reps,
            seed,
            out,
            protocol,
        } => {
            let dataset = if protocol {
                protocol_recording(&ProtocolSpec {
                    seed,
                    ..ProtocolSpec::default()
                })?
                .to_dataset(format!("protocol seed={seed}"))?
            } else {
                generate_dataset(&DatasetSpec {
                    participants,
                    repetitions: reps,
                    seed,
                    ..DatasetSpec::default()
                })?
            };
            save_dataset(&dataset, &out)?;
            println!("wrote {} recordings to {}", dataset.len(), out.display());
        }
        Command::Train {
            data,
            n_min,
            n_max,
            m_min,
            m_max,
            sessions,
            seed,
            out,
            report,
        } => {
            let dataset = load_dataset(&data)?;
            let mut config = TrainConfig::default().with_seed(seed);
            config.grid.n_range = (n_min, n_max);
            config.grid.m_range = (m_min, m_max);
            config.grid.sessions = sessions;
            let outcome = train_cascade(&dataset, &config)?;
            outcome.model.save(&out)?;
            if let Some(path) = report {
                let mut w = create(&path)?;
                outcome.grid.write_csv(&mut w)?;
                finish(w, &path)?;
            }
            outcome.write_summary(std::io::stdout())?;
            if outcome.grid.skipped_cells() > 0 {
                println!("skipped cells: {}", outcome.grid.skipped_cells());
            }
        }
        Command::Eval { model, data, report } => {
            let model = CascadeModel::load(&model)?;
            let dataset = load_dataset(&data)?;
            let evaluation = evaluate_model(&model, &dataset, DEFAULT_IDLE_FRACTION)?;
            let mut w = create(&report)?;
            evaluation.write_report(&mut w)?;
            finish(w, &report)?;
            for (name, m) in [("simple", &evaluation.simple), ("complex", &evaluation.complex)] {
                if m.total() > 0 {
                    let s = m.macro_metrics()?;
                    println!(
                        "{name}: precision={:.4} recall={:.4} average_accuracy={:.4}",
                        s.precision, s.recall, s.average_accuracy
                    );
                }
            }
        }
        Command::Replay {
            model,
            data,
            rate,
            script,
            report,
        } => {
            let model = CascadeModel::load(&model)?;
            let recording = Recording::from_dataset(&load_dataset(&data)?)?;
            let expected = script.as_deref().map(parse_script).transpose()?;
            let r = replay(&model, &recording, rate, expected.as_deref())?;
            let mut w = create(&report)?;
            r.write_latency_csv("replay", &mut w)?;
            finish(w, &report)?;
            for &i in &r.triggers {
                let e = &r.events[i];
                println!("frame {:>6}  {:<3} {}", e.trigger_frame, e.label.code(), e.label.name());
            }
            for m in &r.matches {
                match m.latency {
                    Some(l) => println!("{:<3} latency {:.3} s", m.label.code(), l.latency_s),
                    None => println!("{:<3} not detected", m.label.code()),
                }
            }
            println!(
                "frames={} step max={:.3} ms mean={:.4} ms over-budget={}",
                r.frames_processed, r.max_step_ms, r.mean_step_ms, r.budget_violations
            );
        }
        Command::Serve { model, port } => {
            let model = Arc::new(CascadeModel::load(&model)?);
            let server = serve(model, ("0.0.0.0", port))?;
            println!("listening on {}", server.local_addr());
            server.join();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
