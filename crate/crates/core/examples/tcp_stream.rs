//! Start the streaming service on a free port, send it a nod, and print the
//! events that come back.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;

use chmm::gesture::{generate_dataset, generate_gesture, DatasetSpec, GestureLabel};
use chmm::harness::serve;
use chmm::training::{train_cascade, TrainConfig};

fn main() -> chmm::Result<()> {
    let mut config = TrainConfig::default().with_seed(0);
    config.grid.n_range = (3, 3);
    config.grid.m_range = (12, 12);
    config.grid.sessions = 1;
    let model = train_cascade(&generate_dataset(&DatasetSpec::default())?, &config)?.model;
    let server = serve(Arc::new(model), "127.0.0.1:0")?;
    println!("listening on {}", server.local_addr());

    let nod = generate_gesture(GestureLabel::Nodding, 2.0, 1.6, 0.01, 3)?;
    let io = |e| chmm::Error::io("<client>", e);
    let mut stream = TcpStream::connect(server.local_addr()).map_err(io)?;
    let mut payload = String::new();
    for s in &nod.motion.samples {
        payload.push_str(&format!("{},{},{},{}\n", s.frame, s.omega[0], s.omega[1], s.omega[2]));
    }
    payload.push_str("not,a,sample\n");
    stream.write_all(payload.as_bytes()).map_err(io)?;
    stream.shutdown(std::net::Shutdown::Write).map_err(io)?;
    for line in BufReader::new(stream).lines() {
        println!("{}", line.map_err(io)?);
    }
    server.shutdown();
    Ok(())
}
