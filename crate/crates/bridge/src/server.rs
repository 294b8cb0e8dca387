//! TCP endpoint: one thread per connected client.

use std::io::{BufRead, BufReader};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;

use advisor_harness::{ExperimentConfig, Policies};

use crate::error::{BridgeError, Result};
use crate::session::{run_session, Incoming, RecordSink, SessionEnd, SessionOptions};
use crate::wire::decode;

/// Shared by every session of one server.
#[derive(Clone)]
pub struct Server {
    pub cfg: Arc<ExperimentConfig>,
    pub policies: Policies,
    pub opts: SessionOptions,
    pub sink: Arc<RecordSink>,
    next_id: Arc<AtomicU64>,
}

impl Server {
    pub fn new(
        cfg: ExperimentConfig,
        policies: Policies,
        opts: SessionOptions,
        sink: RecordSink,
    ) -> Self {
        Self {
            cfg: Arc::new(cfg),
            policies,
            opts,
            sink: Arc::new(sink),
            next_id: Arc::default(),
        }
    }

    /// Accepts clients until `shutdown` is set; checked between connections.
    pub fn serve(&self, listener: TcpListener, shutdown: Arc<AtomicBool>) -> Result<()> {
        let io = |source| BridgeError::Io {
            path: "listener".into(),
            source,
        };
        for stream in listener.incoming() {
            if shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = stream.map_err(io)?;
            let server = self.clone();
            thread::spawn(move || {
                if let Err(e) = server.handle(stream) {
                    eprintln!("session failed: {e}");
                }
            });
        }
        Ok(())
    }

    /// Serves one connected client on the calling thread.
    pub fn handle(&self, stream: TcpStream) -> Result<SessionEnd> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let peer = stream
            .peer_addr()
            .map(|a| a.to_string())
            .unwrap_or_default();
        let io = |source| BridgeError::Io {
            path: peer.clone(),
            source,
        };
        let _ = stream.set_nodelay(true);
        let reader = stream.try_clone().map_err(io)?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                let item = match decode(&line) {
                    Ok(m) => Incoming::Message(m),
                    Err(e) => Incoming::Malformed(e),
                };
                if tx.send(item).is_err() {
                    break;
                }
            }
        });
        let end = run_session(
            id,
            &self.cfg,
            &self.policies,
            self.opts,
            &rx,
            &stream,
            &self.sink,
        );
        let _ = stream.shutdown(std::net::Shutdown::Both);
        end
    }
}
