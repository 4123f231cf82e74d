// Copyright 2026 The btlab Authors
// SPDX-License-Identifier: Apache-2.0

//! Generators served by another process.
//!
//! The wire format is JSON lines. Each request is `{"prefix": [token ids]}`
//! and each reply is `{"probs": [reals]}` with one entry per vocabulary
//! symbol. Requests on one connection are strictly serial. A connection that
//! timed out is poisoned, since a late reply would desynchronize it.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use btlab_core::model::BOUNDARY_TOLERANCE;
use btlab_core::{NextTokenDistribution, Oracle, OracleError, OracleHandle, TokenId};
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::config::OracleSource;

#[derive(Serialize)]
struct Request<'a> {
    prefix: &'a [TokenId],
}

#[derive(Deserialize)]
struct Response {
    probs: Vec<f64>,
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    poisoned: Option<String>,
}

pub struct ExternalOracle {
    conn: Mutex<Connection>,
    vocab_size: usize,
    timeout: Duration,
    endpoint: String,
    repairs: AtomicU64,
}

fn spawn_reader(source: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(source).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl ExternalOracle {
    /// Starts `command` and talks to it over its standard streams.
    pub fn spawn(command: &[String], vocab_size: usize, timeout: Duration) -> Result<Self, OracleError> {
        let endpoint = command.join(" ");
        let lost = |detail: String| OracleError::ConnectionLost { request: "connect".into(), detail };
        let (program, args) = command.split_first().ok_or_else(|| lost("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| lost(format!("{endpoint}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let conn = Connection { writer: Box::new(stdin), lines: spawn_reader(stdout), child: Some(child), poisoned: None };
        Ok(Self::from_connection(conn, vocab_size, timeout, endpoint))
    }

    /// Connects to a server at `address`.
    pub fn tcp(address: &str, vocab_size: usize, timeout: Duration) -> Result<Self, OracleError> {
        let lost = |detail: String| OracleError::ConnectionLost { request: "connect".into(), detail };
        let addr = address
            .to_socket_addrs()
            .map_err(|e| lost(format!("{address}: {e}")))?
            .next()
            .ok_or_else(|| lost(format!("{address}: no address")))?;
        let stream = TcpStream::connect_timeout(&addr, timeout).map_err(|e| lost(format!("{address}: {e}")))?;
        stream.set_nodelay(true).ok();
        let reader = stream.try_clone().map_err(|e| lost(format!("{address}: {e}")))?;
        let conn = Connection { writer: Box::new(stream), lines: spawn_reader(reader), child: None, poisoned: None };
        Ok(Self::from_connection(conn, vocab_size, timeout, address.to_string()))
    }

    fn from_connection(conn: Connection, vocab_size: usize, timeout: Duration, endpoint: String) -> Self {
        Self { conn: Mutex::new(conn), vocab_size, timeout, endpoint, repairs: AtomicU64::new(0) }
    }

    /// Replies renormalized within tolerance so far.
    pub fn repairs(&self) -> u64 {
        self.repairs.load(Ordering::Relaxed)
    }

    fn validate(&self, payload: &str) -> Result<NextTokenDistribution, OracleError> {
        let malformed = |reason: String| OracleError::MalformedResponse { payload: payload.to_string(), reason };
        let response: Response = serde_json::from_str(payload).map_err(|e| malformed(e.to_string()))?;
        if response.probs.len() != self.vocab_size {
            return Err(malformed(format!("expected {} probabilities, got {}", self.vocab_size, response.probs.len())));
        }
        let sum: f64 = response.probs.iter().sum();
        if sum != 1.0 && (sum - 1.0).abs() <= BOUNDARY_TOLERANCE {
            self.repairs.fetch_add(1, Ordering::Relaxed);
            debug!("{}: renormalized reply with sum {sum:e}", self.endpoint);
        }
        NextTokenDistribution::new(response.probs).map_err(|e| malformed(e.to_string()))
    }
}

impl Oracle for ExternalOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn query(&self, prefix: &[TokenId]) -> Result<NextTokenDistribution, OracleError> {
        let mut line = serde_json::to_string(&Request { prefix }).expect("request serializes");
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(reason) = &conn.poisoned {
            return Err(OracleError::ConnectionLost { request: line, detail: reason.clone() });
        }
        line.push('\n');
        let sent = conn.writer.write_all(line.as_bytes()).and_then(|_| conn.writer.flush());
        line.pop();
        if let Err(e) = sent {
            conn.poisoned = Some(format!("write failed: {e}"));
            return Err(OracleError::ConnectionLost { request: line, detail: e.to_string() });
        }
        match conn.lines.recv_timeout(self.timeout) {
            Ok(Ok(payload)) => self.validate(&payload),
            Ok(Err(e)) => {
                conn.poisoned = Some(format!("read failed: {e}"));
                Err(OracleError::ConnectionLost { request: line, detail: e.to_string() })
            }
            Err(RecvTimeoutError::Timeout) => {
                conn.poisoned = Some("an earlier request timed out".into());
                Err(OracleError::Timeout { request: line })
            }
            Err(RecvTimeoutError::Disconnected) => {
                conn.poisoned = Some("peer closed the connection".into());
                Err(OracleError::ConnectionLost { request: line, detail: "peer closed the connection".into() })
            }
        }
    }

    fn descriptor(&self) -> String {
        format!("external({})", self.endpoint)
    }
}

impl Drop for ExternalOracle {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|e| e.into_inner());
        if let Some(child) = conn.child.as_mut() {
            if let Err(e) = child.kill().and_then(|_| child.wait()) {
                warn!("{}: {e}", self.endpoint);
            }
        }
    }
}

/// Opens the configured external generator. Builtin sources are not connections.
pub fn connect(source: &OracleSource, vocab_size: usize) -> Result<OracleHandle, OracleError> {
    let oracle = match source {
        OracleSource::Subprocess { command, timeout_ms } => {
            ExternalOracle::spawn(command, vocab_size, Duration::from_millis(*timeout_ms))?
        }
        OracleSource::Tcp { address, timeout_ms } => {
            ExternalOracle::tcp(address, vocab_size, Duration::from_millis(*timeout_ms))?
        }
        OracleSource::Builtin => {
            return Err(OracleError::ConnectionLost {
                request: "connect".into(),
                detail: "builtin oracle has no endpoint".into(),
            })
        }
    };
    Ok(OracleHandle::new(oracle))
}

/// Settings of the reference server behind `btlab mock-oracle`.
#[derive(Debug, Clone, Copy)]
pub struct MockSettings {
    pub vocab_size: usize,
    /// Every probability is `scale / vocab_size`.
    pub scale: f64,
    pub delay: Duration,
}

/// Answers requests from `input` on `output` until end of input.
pub fn serve_mock(input: impl BufRead, mut output: impl Write, settings: MockSettings) -> std::io::Result<()> {
    let probs = vec![settings.scale / settings.vocab_size as f64; settings.vocab_size];
    let reply = serde_json::to_string(&serde_json::json!({ "probs": probs })).expect("reply serializes");
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Err(e) = serde_json::from_str::<serde_json::Value>(&line) {
            writeln!(output, "{{\"error\":{}}}", serde_json::json!(e.to_string()))?;
            output.flush()?;
            continue;
        }
        if !settings.delay.is_zero() {
            thread::sleep(settings.delay);
        }
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
