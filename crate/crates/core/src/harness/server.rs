use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use crate::cascade::CascadeModel;
use crate::error::{Error, Result};
use crate::gesture::io::parse_record;

/// A running streaming service.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting connections. Open sessions run until their client
    /// disconnects.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    /// Blocks until the accept loop exits.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_accepting();
        }
    }
}

/// Binds `addr` and serves every connection on its own thread with its own
/// cascade state. Clients send `frame,yaw,pitch,roll` lines and receive one
/// JSON line per emitted event; a malformed line gets an `{"error": ...}`
/// reply and the session continues.
pub fn serve(model: Arc<CascadeModel>, addr: impl ToSocketAddrs) -> Result<ServerHandle> {
    model.check()?;
    let listener = TcpListener::bind(addr).map_err(|e| Error::io("<listen>", e))?;
    let local = listener.local_addr().map_err(|e| Error::io("<listen>", e))?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let thread = thread::spawn(move || {
        for conn in listener.incoming() {
            if flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let model = model.clone();
            thread::spawn(move || {
                let reader = match stream.try_clone() {
                    Ok(r) => BufReader::new(r),
                    Err(_) => return,
                };
                let _ = handle_connection(&model, reader, stream);
            });
        }
    });
    Ok(ServerHandle {
        addr: local,
        stop,
        thread: Some(thread),
    })
}

/// One client session over any line-oriented transport.
pub fn handle_connection<R: BufRead, W: Write>(model: &CascadeModel, input: R, mut output: W) -> Result<()> {
    let io = |e| Error::io("<connection>", e);
    let mut state = model.init_state()?;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let reply = match parse_record(line, i + 1).and_then(|s| model.step(&mut state, &s)) {
            Ok(Some(event)) => event.to_json_line(),
            Ok(None) => continue,
            Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
        };
        writeln!(output, "{reply}").map_err(io)?;
        output.flush().map_err(io)?;
    }
    Ok(())
}
