//! A stand-in browser that speaks the protocol subset the driver uses
//! (`Page.enable`, `Page.navigate`, `Page.captureScreenshot`,
//! `Runtime.evaluate`) over a real WebSocket, backed by fixture pages.
//!
//! Driver scripts are recognized by their header line and emulated against
//! the fixture's element store; anything else goes to a tiny expression
//! evaluator. Target discovery is served at `/json/list`.

mod dom;
mod eval;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};
use webnav_core::label_map::{LabelMap, LabeledElement};

use crate::scripts::{self, ScriptOp};

pub use dom::{FixtureNode, FixturePage, FixtureStyle, Viewport};
use dom::Dom;

#[derive(Debug, Clone)]
pub struct FakeConfig {
    pub pages: Vec<FixturePage>,
    /// Page loaded at startup; `about:blank` when unset.
    pub start_url: Option<String>,
    /// Number of page targets listed; zero lists only a worker target.
    pub page_targets: usize,
    /// Before each reply, also send a stray event and a stale duplicate of
    /// the previous reply.
    pub noise: bool,
    /// Returned verbatim for every screenshot instead of a rendering.
    pub canned_png: Option<Vec<u8>>,
    /// Methods that never get a reply.
    pub stall_methods: BTreeSet<String>,
}

impl Default for FakeConfig {
    fn default() -> Self {
        Self {
            pages: Vec::new(),
            start_url: None,
            page_targets: 1,
            noise: false,
            canned_png: None,
            stall_methods: BTreeSet::new(),
        }
    }
}

impl FakeConfig {
    pub fn with_pages(pages: Vec<FixturePage>) -> Self {
        Self {
            pages,
            ..Self::default()
        }
    }
}

/// Reads every `*.json` fixture page in `dir`, sorted by file name.
pub fn load_fixture_dir(dir: &Path) -> io::Result<Vec<FixturePage>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", p.display()))
            })
        })
        .collect()
}

fn normalize_url(raw: &str) -> String {
    url::Url::parse(raw).map_or_else(|_| raw.to_string(), String::from)
}

struct FakeState {
    config: FakeConfig,
    pages: BTreeMap<String, FixturePage>,
    dom: Dom,
    scroll_y: f64,
    overlay: Option<Vec<LabeledElement>>,
    submissions: Vec<BTreeMap<String, String>>,
    methods: Vec<String>,
    loader_seq: u64,
}

struct Outgoing {
    before: Vec<Value>,
    reply: Option<Value>,
    after: Vec<Value>,
}

fn event(method: &str, params: Value) -> Value {
    json!({ "method": method, "params": params })
}

fn remote_object(v: Value) -> Value {
    match &v {
        Value::Null => json!({ "type": "object", "subtype": "null", "value": null }),
        Value::Bool(_) => json!({ "type": "boolean", "value": v }),
        Value::Number(_) => json!({ "type": "number", "value": v }),
        Value::String(_) => json!({ "type": "string", "value": v }),
        _ => json!({ "type": "object", "value": v }),
    }
}

fn thrown(description: &str) -> Value {
    let exception = json!({ "type": "object", "subtype": "error", "description": description });
    json!({
        "result": exception,
        "exceptionDetails": {
            "exceptionId": 1, "text": "Uncaught", "lineNumber": 0, "columnNumber": 0,
            "exception": exception,
        }
    })
}

fn navigation_events(url: &str, loaded: bool) -> Vec<Value> {
    let mut out = vec![event("Page.frameStartedLoading", json!({ "frameId": "main" }))];
    if loaded {
        out.push(event(
            "Page.frameNavigated",
            json!({ "frame": { "id": "main", "loaderId": "L", "url": url } }),
        ));
        out.push(event("Page.loadEventFired", json!({ "timestamp": 0.0 })));
    }
    out
}

impl FakeState {
    fn new(config: FakeConfig) -> Self {
        let pages: BTreeMap<String, FixturePage> = config
            .pages
            .iter()
            .map(|p| {
                let mut p = p.clone();
                p.url = normalize_url(&p.url);
                (p.url.clone(), p)
            })
            .collect();
        let start = config
            .start_url
            .as_deref()
            .and_then(|u| pages.get(&normalize_url(u)).cloned())
            .unwrap_or_else(FixturePage::blank);
        Self {
            dom: Dom::load(&start),
            config,
            pages,
            scroll_y: 0.0,
            overlay: None,
            submissions: Vec::new(),
            methods: Vec::new(),
            loader_seq: 0,
        }
    }

    /// Loads `url` if it is a known page; returns whether it loaded.
    fn load(&mut self, url: &str) -> bool {
        match self.pages.get(&normalize_url(url)) {
            Some(page) => {
                self.dom = Dom::load(page);
                self.scroll_y = 0.0;
                self.overlay = None;
                true
            }
            None => false,
        }
    }

    fn screenshot(&self) -> Vec<u8> {
        match &self.config.canned_png {
            Some(bytes) => bytes.clone(),
            None => render::render(&self.dom, self.scroll_y, self.overlay.as_deref()),
        }
    }

    fn label_map(&self) -> LabelMap {
        LabelMap {
            url: self.dom.url.clone(),
            captured_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            elements: self.dom.enumerate(self.scroll_y),
        }
    }

    fn handle(&mut self, method: &str, params: &Value) -> Outgoing {
        self.methods.push(method.to_string());
        let reply = |v: Value| Outgoing {
            before: Vec::new(),
            reply: Some(json!({ "result": v })),
            after: Vec::new(),
        };
        match method {
            "Page.enable" | "Runtime.enable" => reply(json!({})),
            "Page.navigate" => {
                let url = params["url"].as_str().unwrap_or_default().to_string();
                self.loader_seq += 1;
                let loaded = self.load(&url);
                Outgoing {
                    before: Vec::new(),
                    reply: Some(json!({ "result": {
                        "frameId": "main", "loaderId": format!("L{}", self.loader_seq)
                    } })),
                    after: navigation_events(&normalize_url(&url), loaded),
                }
            }
            "Page.captureScreenshot" => {
                let data = base64::engine::general_purpose::STANDARD.encode(self.screenshot());
                reply(json!({ "data": data }))
            }
            "Runtime.evaluate" => {
                let source = params["expression"].as_str().unwrap_or_default();
                let mut before = Vec::new();
                let result = match scripts::parse_header(source) {
                    Some((op, args)) => self.run_script(op, &args, &mut before),
                    None => eval::evaluate(
                        source,
                        &eval::Globals {
                            title: &self.dom.title,
                            url: &self.dom.url,
                            scroll_y: self.scroll_y,
                            inner_width: self.dom.viewport.width,
                            inner_height: self.dom.viewport.height,
                        },
                    ),
                };
                let body = match result {
                    Ok(v) => json!({ "result": remote_object(v) }),
                    Err(desc) => thrown(&desc),
                };
                Outgoing {
                    before,
                    reply: Some(json!({ "result": body })),
                    after: Vec::new(),
                }
            }
            other => Outgoing {
                before: Vec::new(),
                reply: Some(json!({ "error": {
                    "code": -32601, "message": format!("'{other}' wasn't found")
                } })),
                after: Vec::new(),
            },
        }
    }

    fn resolve_one(&self, args: &Value) -> Option<usize> {
        let found = self.dom.resolve(args["selector"].as_str().unwrap_or_default());
        (found.len() == 1).then(|| found[0])
    }

    fn run_script(&mut self, op: ScriptOp, args: &Value, events: &mut Vec<Value>) -> Result<Value, String> {
        match op {
            ScriptOp::Labeler => {
                let map = self.label_map();
                let json = map.to_json();
                self.overlay = Some(map.elements);
                Ok(Value::String(json))
            }
            ScriptOp::ClearLabels => {
                self.overlay = None;
                Ok(json!({ "ok": true }))
            }
            ScriptOp::Click => {
                let Some(idx) = self.resolve_one(args) else {
                    return Ok(json!({ "ok": false, "error": "stale" }));
                };
                let effect = self.dom.click(idx);
                if let Some(fields) = effect.submitted {
                    self.submissions.push(fields);
                }
                if let Some(url) = effect.navigate_to {
                    let loaded = self.load(&url);
                    events.extend(navigation_events(&url, loaded));
                }
                Ok(json!({ "ok": true }))
            }
            ScriptOp::Type => {
                let Some(idx) = self.resolve_one(args) else {
                    return Ok(json!({ "ok": false, "error": "stale" }));
                };
                if !self.dom.is_editable(idx) {
                    return Ok(json!({ "ok": false, "error": "not-editable" }));
                }
                self.dom
                    .set_text_value(idx, args["text"].as_str().unwrap_or_default());
                Ok(json!({ "ok": true }))
            }
            ScriptOp::Scroll => {
                self.overlay = None;
                let sign = args["sign"].as_f64().unwrap_or(1.0);
                let fraction = args["fraction"].as_f64().unwrap_or(scripts::SCROLL_FRACTION);
                let delta = (self.dom.viewport.height * fraction).round();
                self.scroll_y = (self.scroll_y + sign * delta).clamp(0.0, self.dom.max_scroll());
                Ok(json!({ "ok": true, "scrollY": self.scroll_y }))
            }
            ScriptOp::Probe => {
                let mut out = json!({
                    "url": self.dom.url, "title": self.dom.title, "scrollY": self.scroll_y
                });
                if let Some(sel) = args["selector"].as_str() {
                    let found = self.dom.resolve(sel);
                    out["matches"] = json!(found.len());
                    if let [idx] = found[..] {
                        let node = self.dom.node(idx);
                        out["value"] = json!(node.value);
                        out["clicks"] = json!(node.clicks);
                    }
                }
                Ok(out)
            }
        }
    }

    fn targets(&self, addr: SocketAddr) -> Value {
        if self.config.page_targets == 0 {
            return json!([{
                "id": "worker-0", "type": "service_worker", "title": "worker",
                "url": "chrome-extension://fake/worker.js",
                "webSocketDebuggerUrl": format!("ws://{addr}/devtools/worker/worker-0"),
            }]);
        }
        (0..self.config.page_targets)
            .map(|i| {
                json!({
                    "id": format!("page-{i}"), "type": "page", "title": self.dom.title,
                    "url": self.dom.url,
                    "webSocketDebuggerUrl": format!("ws://{addr}/devtools/page/page-{i}"),
                })
            })
            .collect()
    }
}

/// A running fake browser; shuts down on drop.
pub struct FakeBrowser {
    addr: SocketAddr,
    state: Arc<Mutex<FakeState>>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl FakeBrowser {
    pub fn start(config: FakeConfig) -> io::Result<Self> {
        Self::start_on("127.0.0.1:0", config)
    }

    pub fn start_on(bind: &str, config: FakeConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let state = Arc::new(Mutex::new(FakeState::new(config)));
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let state = Arc::clone(&state);
            let stop = Arc::clone(&stop);
            thread::Builder::new()
                .name("fake-browser-accept".into())
                .spawn(move || {
                    for stream in listener.incoming() {
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                        let Ok(stream) = stream else { continue };
                        let state = Arc::clone(&state);
                        let _ = thread::Builder::new()
                            .name("fake-browser-conn".into())
                            .spawn(move || {
                                if let Err(e) = serve(stream, addr, &state) {
                                    tracing::debug!("fake browser connection ended: {e}");
                                }
                            });
                    }
                })?
        };
        Ok(Self {
            addr,
            state,
            stop,
            accept: Some(accept),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port`, for target discovery.
    pub fn http_endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// The first page target's debugger URL.
    pub fn ws_endpoint(&self) -> String {
        format!("ws://{}/devtools/page/page-0", self.addr)
    }

    fn lock(&self) -> MutexGuard<'_, FakeState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn current_url(&self) -> String {
        self.lock().dom.url.clone()
    }

    pub fn scroll_y(&self) -> f64 {
        self.lock().scroll_y
    }

    pub fn labels_active(&self) -> bool {
        self.lock().overlay.is_some()
    }

    /// Detaches the element `selector` resolves to. False if it does not
    /// resolve to exactly one element.
    pub fn remove_element(&self, selector: &str) -> bool {
        let mut st = self.lock();
        match st.dom.resolve(selector)[..] {
            [idx] => {
                st.dom.remove(idx);
                true
            }
            _ => false,
        }
    }

    /// `(value, clicks)` of the element `selector` resolves to.
    pub fn element_state(&self, selector: &str) -> Option<(Option<String>, u32)> {
        let st = self.lock();
        match st.dom.resolve(selector)[..] {
            [idx] => {
                let node = st.dom.node(idx);
                Some((node.value.clone(), node.clicks))
            }
            _ => None,
        }
    }

    /// Label map the labeler would produce right now.
    pub fn expected_label_map(&self) -> LabelMap {
        self.lock().label_map()
    }

    /// Form fields captured by each submit, in order.
    pub fn submissions(&self) -> Vec<BTreeMap<String, String>> {
        self.lock().submissions.clone()
    }

    /// Every protocol method received, in order.
    pub fn methods_seen(&self) -> Vec<String> {
        self.lock().methods.clone()
    }
}

impl Drop for FakeBrowser {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Peeks until the request head is complete without consuming it.
fn peek_head(stream: &TcpStream) -> io::Result<String> {
    let mut buf = vec![0u8; 8192];
    for _ in 0..200 {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            return Ok(String::from_utf8_lossy(&buf[..end]).into_owned());
        }
        if n == buf.len() {
            break;
        }
        thread::sleep(Duration::from_millis(5));
    }
    Err(io::Error::new(io::ErrorKind::InvalidData, "request head too large or incomplete"))
}

fn serve(mut stream: TcpStream, addr: SocketAddr, state: &Mutex<FakeState>) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let head = peek_head(&stream)?;
    let lower = head.to_ascii_lowercase();
    let path = head.split_whitespace().nth(1).unwrap_or("/").to_string();
    if lower.contains("upgrade: websocket") {
        stream.set_read_timeout(None)?;
        let socket = tungstenite::accept(stream)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        return serve_socket(socket, state);
    }

    // Consume the head before answering.
    let mut sink = vec![0u8; head.len() + 4];
    stream.read_exact(&mut sink)?;
    let (status, body) = match path.as_str() {
        "/json" | "/json/list" => {
            let st = state.lock().unwrap_or_else(|p| p.into_inner());
            ("200 OK", st.targets(addr).to_string())
        }
        "/json/version" => (
            "200 OK",
            json!({ "Browser": "webnav-fake/0.1", "Protocol-Version": "1.3" }).to_string(),
        ),
        _ => ("404 Not Found", json!({ "error": "not found" }).to_string()),
    };
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn serve_socket(mut socket: WebSocket<TcpStream>, state: &Mutex<FakeState>) -> io::Result<()> {
    let mut last_reply: Option<Value> = None;
    let to_io = |e: tungstenite::Error| io::Error::other(e.to_string());
    loop {
        let msg = match socket.read() {
            Ok(m) => m,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Err(e) => return Err(to_io(e)),
        };
        let Message::Text(text) = msg else {
            if msg.is_close() {
                return Ok(());
            }
            continue;
        };
        let Ok(request) = serde_json::from_str::<Value>(text.as_str()) else {
            continue;
        };
        let id = request["id"].clone();
        let method = request["method"].as_str().unwrap_or_default().to_string();
        let (out, noise, stalled) = {
            let mut st = state.lock().unwrap_or_else(|p| p.into_inner());
            let out = st.handle(&method, &request["params"]);
            (
                out,
                st.config.noise,
                st.config.stall_methods.contains(&method),
            )
        };
        let mut frames: Vec<Value> = out.before;
        if !stalled {
            if let Some(mut reply) = out.reply {
                if noise {
                    frames.push(event("Fake.noise", json!({ "before": id })));
                    if let Some(prev) = last_reply.take() {
                        frames.push(prev);
                    }
                }
                reply["id"] = id;
                last_reply = Some(reply.clone());
                frames.push(reply);
            }
        }
        frames.extend(out.after);
        for frame in frames {
            socket.send(Message::text(frame.to_string())).map_err(to_io)?;
        }
    }
}
