//! Minimal DevTools protocol transport: JSON messages over one WebSocket,
//! replies correlated to requests by id, events queued in arrival order.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

use crate::driver::{ConnectError, DriverError};

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub method: String,
    pub params: Value,
}

pub(crate) struct Transport {
    socket: WebSocket<TcpStream>,
    next_id: u64,
    /// Ids sent but not yet answered.
    pending: BTreeSet<u64>,
    /// Replies that arrived while waiting on a different id.
    parked: HashMap<u64, Result<Value, DriverError>>,
    events: VecDeque<Event>,
}

impl Transport {
    pub(crate) fn open(ws_url: &str, timeout: Duration) -> Result<Self, ConnectError> {
        let parsed = url::Url::parse(ws_url)
            .map_err(|e| ConnectError::Unreachable(format!("{ws_url}: {e}")))?;
        if parsed.scheme() != "ws" {
            return Err(ConnectError::HandshakeFailed(format!(
                "unsupported scheme {:?} (only ws:// is supported)",
                parsed.scheme()
            )));
        }
        let host = parsed
            .host_str()
            .ok_or_else(|| ConnectError::Unreachable(format!("{ws_url}: no host")))?;
        let port = parsed.port().unwrap_or(80);
        let addrs: Vec<_> = (host, port)
            .to_socket_addrs()
            .map_err(|e| ConnectError::Unreachable(format!("{host}:{port}: {e}")))?
            .collect();
        let mut last = None;
        let mut stream = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last = Some(e),
            }
        }
        let stream = stream.ok_or_else(|| {
            ConnectError::Unreachable(format!(
                "{host}:{port}: {}",
                last.map_or_else(|| "no address".to_string(), |e| e.to_string())
            ))
        })?;
        stream
            .set_read_timeout(Some(timeout))
            .and_then(|_| stream.set_write_timeout(Some(timeout)))
            .and_then(|_| stream.set_nodelay(true))
            .map_err(|e| ConnectError::Unreachable(e.to_string()))?;
        let (socket, _) = tungstenite::client::client(ws_url, stream)
            .map_err(|e| ConnectError::HandshakeFailed(e.to_string()))?;
        Ok(Self {
            socket,
            next_id: 1,
            pending: BTreeSet::new(),
            parked: HashMap::new(),
            events: VecDeque::new(),
        })
    }

    /// The id the next request will carry.
    pub(crate) fn next_request_id(&self) -> u64 {
        self.next_id
    }

    pub(crate) fn send(&mut self, method: &str, params: Value) -> Result<u64, DriverError> {
        let id = self.next_id;
        self.next_id += 1;
        let frame = json!({ "id": id, "method": method, "params": params });
        self.socket
            .send(Message::text(frame.to_string()))
            .map_err(ws_error)?;
        self.pending.insert(id);
        Ok(id)
    }

    pub(crate) fn call(
        &mut self,
        method: &str,
        params: Value,
        timeout: Duration,
    ) -> Result<Value, DriverError> {
        let id = self.send(method, params)?;
        self.wait_reply(id, method, Instant::now() + timeout)
    }

    fn wait_reply(&mut self, id: u64, method: &str, deadline: Instant) -> Result<Value, DriverError> {
        loop {
            if let Some(reply) = self.parked.remove(&id) {
                return reply;
            }
            if !self.pump(deadline)? {
                // Abandon the id: a late reply is dropped instead of parked.
                self.pending.remove(&id);
                return Err(DriverError::Timeout(method.to_string()));
            }
        }
    }

    /// Reads at most one message. Returns `false` if the deadline passed
    /// with nothing to read.
    pub(crate) fn pump(&mut self, deadline: Instant) -> Result<bool, DriverError> {
        let now = Instant::now();
        if now >= deadline {
            return Ok(false);
        }
        let remaining = (deadline - now).max(Duration::from_millis(1));
        self.socket
            .get_mut()
            .set_read_timeout(Some(remaining))
            .map_err(|e| DriverError::Disconnected(e.to_string()))?;
        let msg = match self.socket.read() {
            Ok(m) => m,
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
            {
                return Ok(false)
            }
            Err(e) => return Err(ws_error(e)),
        };
        match msg {
            Message::Text(text) => self.dispatch(text.as_str()),
            Message::Close(_) => {
                return Err(DriverError::Disconnected("peer closed the socket".into()))
            }
            _ => {}
        }
        Ok(true)
    }

    fn dispatch(&mut self, text: &str) {
        let Ok(mut value) = serde_json::from_str::<Value>(text) else {
            tracing::warn!("dropping non-JSON protocol frame");
            return;
        };
        if let Some(id) = value.get("id").and_then(Value::as_u64) {
            if !self.pending.remove(&id) {
                tracing::debug!(id, "dropping reply for an id that is not pending");
                return;
            }
            let reply = match value.get_mut("error") {
                Some(err) => Err(DriverError::Protocol(
                    err.get("message")
                        .and_then(Value::as_str)
                        .map_or_else(|| err.to_string(), str::to_string),
                )),
                None => Ok(value.get_mut("result").map(Value::take).unwrap_or(Value::Null)),
            };
            self.parked.insert(id, reply);
        } else if let Some(method) = value.get("method").and_then(Value::as_str) {
            let method = method.to_string();
            let params = value.get_mut("params").map(Value::take).unwrap_or(Value::Null);
            self.events.push_back(Event { method, params });
        }
    }

    pub(crate) fn drain_events(&mut self) -> Vec<Event> {
        self.events.drain(..).collect()
    }
}

fn ws_error(e: tungstenite::Error) -> DriverError {
    match e {
        tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed => {
            DriverError::Disconnected("socket closed".into())
        }
        tungstenite::Error::Io(io) => DriverError::Disconnected(io.to_string()),
        other => DriverError::Protocol(other.to_string()),
    }
}
