//! Browser control over the DevTools protocol: navigation, script
//! evaluation, screenshots, the labeler, and grounded actions.

use std::fmt;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};
use webnav_core::command::Direction;
use webnav_core::label_map::{parse_label_map, LabelMap, LabeledElement, MapError};

use crate::cdp::Transport;
use crate::scripts;

/// Environment variable naming the default debugging endpoint.
pub const ENDPOINT_ENV: &str = "WEBNAV_BROWSER_ENDPOINT";

pub const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// PNG-encoded image bytes; the signature is checked on construction.
#[derive(Clone, PartialEq, Eq)]
pub struct Png(Vec<u8>);

impl Png {
    pub fn new(bytes: Vec<u8>) -> Result<Self, NotPng> {
        if bytes.starts_with(&PNG_SIGNATURE) {
            Ok(Self(bytes))
        } else {
            Err(NotPng)
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for Png {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Png({} bytes)", self.0.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("bytes do not start with the PNG signature")]
pub struct NotPng;

/// What the Screenshot step hands to the model pipeline: the page before
/// and after labeling, plus the label map captured in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenshotPair {
    pub unlabeled: Png,
    pub labeled: Png,
    pub label_map: LabelMap,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConnectError {
    #[error("debugging endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("protocol handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("no page target is available")]
    NoPageTarget,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DriverError {
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("script threw: {0}")]
    ScriptException(String),
    #[error("element {0:?} no longer resolves to exactly one node")]
    StaleElement(String),
    #[error("element {0:?} does not accept text input")]
    NotEditable(String),
    #[error("connection lost: {0}")]
    Disconnected(String),
    #[error(transparent)]
    LabelMap(#[from] MapError),
}

impl DriverError {
    /// Whether the session can carry on after this failure.
    pub fn is_recoverable(&self) -> bool {
        !matches!(self, DriverError::Disconnected(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriverOptions {
    pub connect_timeout: Duration,
    pub navigation_timeout: Duration,
    pub eval_timeout: Duration,
    /// How long to watch for a navigation after a click.
    pub click_settle: Duration,
}

impl Default for DriverOptions {
    fn default() -> Self {
        Self {
            connect_timeout: Duration::from_secs(5),
            navigation_timeout: Duration::from_secs(15),
            eval_timeout: Duration::from_secs(5),
            click_settle: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageState {
    pub current_url: String,
    /// True while the labeler overlay is on the page.
    pub labels_active: bool,
}

/// Page readback used by tests and diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Probe {
    pub url: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub scroll_y: f64,
    #[serde(default)]
    pub matches: Option<u32>,
    #[serde(default)]
    pub value: Option<String>,
    #[serde(default)]
    pub clicks: Option<u32>,
}

/// The operations the session loop needs from a browser.
pub trait Browser {
    fn navigate(&mut self, url: &str) -> Result<(), DriverError>;
    fn perceive(&mut self) -> Result<ScreenshotPair, DriverError>;
    fn execute_click(&mut self, target: &LabeledElement) -> Result<(), DriverError>;
    fn execute_type(&mut self, target: &LabeledElement, text: &str) -> Result<(), DriverError>;
    fn execute_scroll(&mut self, direction: Direction) -> Result<(), DriverError>;
}

#[derive(Debug, Default)]
struct NavWatch {
    started: bool,
    navigated: bool,
    loaded: bool,
}

/// A live session attached to one page target.
pub struct CdpDriver {
    endpoint: String,
    transport: Transport,
    options: DriverOptions,
    state: PageState,
    nav: NavWatch,
}

impl fmt::Debug for CdpDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CdpDriver")
            .field("endpoint", &self.endpoint)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TargetInfo {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    url: String,
    web_socket_debugger_url: Option<String>,
}

/// Lists targets at `http://host:port/json/list` and picks the first page.
fn discover(endpoint: &str, timeout: Duration) -> Result<(String, String), ConnectError> {
    let base = if endpoint.contains("://") {
        endpoint.trim_end_matches('/').to_string()
    } else {
        format!("http://{}", endpoint.trim_end_matches('/'))
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into();
    let list_url = format!("{base}/json/list");
    let body = agent
        .get(&list_url)
        .call()
        .map_err(|e| match e {
            ureq::Error::StatusCode(code) => {
                ConnectError::HandshakeFailed(format!("{list_url}: HTTP {code}"))
            }
            e => ConnectError::Unreachable(format!("{list_url}: {e}")),
        })?
        .body_mut()
        .read_to_string()
        .map_err(|e| ConnectError::HandshakeFailed(format!("{list_url}: {e}")))?;
    let targets: Vec<TargetInfo> = serde_json::from_str(&body)
        .map_err(|e| ConnectError::HandshakeFailed(format!("bad target list: {e}")))?;
    targets
        .into_iter()
        .filter(|t| t.kind == "page")
        .find_map(|t| t.web_socket_debugger_url.map(|ws| (ws, t.url)))
        .ok_or(ConnectError::NoPageTarget)
}

impl CdpDriver {
    pub fn connect(endpoint: &str) -> Result<Self, ConnectError> {
        Self::connect_with(endpoint, DriverOptions::default())
    }

    /// `endpoint` is either a page's `ws://` debugger URL or the browser's
    /// HTTP debugging address, in which case the first page target is used.
    pub fn connect_with(endpoint: &str, options: DriverOptions) -> Result<Self, ConnectError> {
        let ws_url = if endpoint.starts_with("ws://") || endpoint.starts_with("wss://") {
            endpoint.to_string()
        } else {
            discover(endpoint, options.connect_timeout)?.0
        };
        let transport = Transport::open(&ws_url, options.connect_timeout)?;
        let mut driver = Self {
            endpoint: ws_url,
            transport,
            options,
            state: PageState::default(),
            nav: NavWatch::default(),
        };
        driver
            .call("Page.enable", json!({}), options.connect_timeout)
            .map_err(|e| ConnectError::HandshakeFailed(e.to_string()))?;
        let probe = driver
            .probe(None)
            .map_err(|e| ConnectError::HandshakeFailed(e.to_string()))?;
        driver.state.current_url = probe.url;
        Ok(driver)
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn page_state(&self) -> &PageState {
        &self.state
    }

    pub fn options(&self) -> DriverOptions {
        self.options
    }

    pub fn next_request_id(&self) -> u64 {
        self.transport.next_request_id()
    }

    fn call(&mut self, method: &str, params: Value, timeout: Duration) -> Result<Value, DriverError> {
        let out = self.transport.call(method, params, timeout);
        self.absorb_events();
        out
    }

    fn absorb_events(&mut self) {
        for event in self.transport.drain_events() {
            match event.method.as_str() {
                "Page.frameStartedLoading" | "Page.frameRequestedNavigation" => {
                    self.nav.started = true;
                }
                "Page.frameNavigated" => {
                    let frame = &event.params["frame"];
                    if frame.get("parentId").is_none() {
                        if let Some(url) = frame["url"].as_str() {
                            self.state.current_url = url.to_string();
                        }
                        self.state.labels_active = false;
                        self.nav.navigated = true;
                    }
                }
                "Page.loadEventFired" => self.nav.loaded = true,
                _ => {}
            }
        }
    }

    fn wait_for_load(&mut self, deadline: Instant) -> Result<(), DriverError> {
        loop {
            self.absorb_events();
            if self.nav.loaded {
                return Ok(());
            }
            if !self.transport.pump(deadline)? {
                return Err(DriverError::Timeout("Page.loadEventFired".into()));
            }
        }
    }

    pub fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        let deadline = Instant::now() + self.options.navigation_timeout;
        self.absorb_events();
        self.nav = NavWatch::default();
        self.state.labels_active = false;
        let reply = self.call(
            "Page.navigate",
            json!({ "url": url }),
            self.options.navigation_timeout,
        )?;
        if let Some(err) = reply.get("errorText").and_then(Value::as_str) {
            if !err.is_empty() {
                return Err(DriverError::Protocol(format!("navigation to {url} failed: {err}")));
            }
        }
        self.wait_for_load(deadline)?;
        if !self.nav.navigated {
            self.state.current_url = url.to_string();
        }
        self.state.labels_active = false;
        Ok(())
    }

    /// Evaluates `js` in the page and returns its JSON value.
    pub fn eval_script(&mut self, js: &str) -> Result<Value, DriverError> {
        let mut reply = self.call(
            "Runtime.evaluate",
            json!({ "expression": js, "returnByValue": true, "awaitPromise": true }),
            self.options.eval_timeout,
        )?;
        if let Some(details) = reply.get("exceptionDetails") {
            let message = details["exception"]["description"]
                .as_str()
                .or_else(|| details["text"].as_str())
                .unwrap_or("uncaught exception");
            return Err(DriverError::ScriptException(message.to_string()));
        }
        Ok(reply
            .get_mut("result")
            .and_then(|r| r.get_mut("value"))
            .map(Value::take)
            .unwrap_or(Value::Null))
    }

    pub fn capture_screenshot(&mut self) -> Result<Png, DriverError> {
        let reply = self.call(
            "Page.captureScreenshot",
            json!({ "format": "png" }),
            self.options.eval_timeout,
        )?;
        let data = reply["data"]
            .as_str()
            .ok_or_else(|| DriverError::Protocol("screenshot reply has no data".into()))?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(data)
            .map_err(|e| DriverError::Protocol(format!("screenshot is not base64: {e}")))?;
        Png::new(bytes).map_err(|e| DriverError::Protocol(e.to_string()))
    }

    /// Removes the badge overlay if present.
    pub fn clear_labels(&mut self) -> Result<(), DriverError> {
        self.eval_script(&scripts::clear_labels())?;
        self.state.labels_active = false;
        Ok(())
    }

    /// Unlabeled screenshot, labeler injection, labeled screenshot. The
    /// overlay stays up until the next navigation, scroll, or perceive.
    pub fn perceive(&mut self) -> Result<ScreenshotPair, DriverError> {
        if self.state.labels_active {
            self.clear_labels()?;
        }
        let unlabeled = self.capture_screenshot()?;
        let raw = self.eval_script(&scripts::labeler())?;
        let json = raw
            .as_str()
            .ok_or_else(|| DriverError::Protocol(format!("labeler returned {raw}")))?;
        let label_map = parse_label_map(json)?;
        self.state.labels_active = true;
        let labeled = self.capture_screenshot()?;
        Ok(ScreenshotPair {
            unlabeled,
            labeled,
            label_map,
        })
    }

    fn expect_ok(&self, outcome: Value, selector: &str) -> Result<Value, DriverError> {
        if outcome["ok"].as_bool() == Some(true) {
            return Ok(outcome);
        }
        match outcome["error"].as_str() {
            Some("stale") => Err(DriverError::StaleElement(selector.to_string())),
            Some("not-editable") => Err(DriverError::NotEditable(selector.to_string())),
            _ => Err(DriverError::Protocol(format!("unexpected script result {outcome}"))),
        }
    }

    pub fn execute_click(&mut self, target: &LabeledElement) -> Result<(), DriverError> {
        self.absorb_events();
        self.nav = NavWatch::default();
        let out = self.eval_script(&scripts::click(&target.selector))?;
        self.expect_ok(out, &target.selector)?;

        let settle = Instant::now() + self.options.click_settle;
        while !(self.nav.started || self.nav.navigated) {
            if !self.transport.pump(settle)? {
                break;
            }
            self.absorb_events();
        }
        if (self.nav.started || self.nav.navigated) && !self.nav.loaded {
            self.wait_for_load(Instant::now() + self.options.navigation_timeout)?;
        }
        Ok(())
    }

    pub fn execute_type(&mut self, target: &LabeledElement, text: &str) -> Result<(), DriverError> {
        let out = self.eval_script(&scripts::type_text(&target.selector, text))?;
        self.expect_ok(out, &target.selector).map(drop)
    }

    pub fn execute_scroll(&mut self, direction: Direction) -> Result<(), DriverError> {
        let out = self.eval_script(&scripts::scroll(direction))?;
        self.state.labels_active = false;
        self.expect_ok(out, "window").map(drop)
    }

    /// Reads url, scroll offset, and optionally one element's value and
    /// click counter.
    pub fn probe(&mut self, selector: Option<&str>) -> Result<Probe, DriverError> {
        let raw = self.eval_script(&scripts::probe(selector))?;
        serde_json::from_value(raw).map_err(|e| DriverError::Protocol(format!("bad probe reply: {e}")))
    }
}

impl Browser for CdpDriver {
    fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        CdpDriver::navigate(self, url)
    }

    fn perceive(&mut self) -> Result<ScreenshotPair, DriverError> {
        CdpDriver::perceive(self)
    }

    fn execute_click(&mut self, target: &LabeledElement) -> Result<(), DriverError> {
        CdpDriver::execute_click(self, target)
    }

    fn execute_type(&mut self, target: &LabeledElement, text: &str) -> Result<(), DriverError> {
        CdpDriver::execute_type(self, target, text)
    }

    fn execute_scroll(&mut self, direction: Direction) -> Result<(), DriverError> {
        CdpDriver::execute_scroll(self, direction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_signature_is_checked() {
        assert!(Png::new(PNG_SIGNATURE.to_vec()).is_ok());
        assert_eq!(Png::new(b"GIF89a".to_vec()), Err(NotPng));
    }

    #[test]
    fn only_disconnects_are_fatal() {
        assert!(DriverError::StaleElement("#a".into()).is_recoverable());
        assert!(DriverError::Timeout("x".into()).is_recoverable());
        assert!(!DriverError::Disconnected("x".into()).is_recoverable());
    }

    #[test]
    fn closed_port_is_unreachable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let opts = DriverOptions {
            connect_timeout: Duration::from_millis(500),
            ..Default::default()
        };
        let err = CdpDriver::connect_with(&format!("http://127.0.0.1:{port}"), opts).unwrap_err();
        assert!(matches!(err, ConnectError::Unreachable(_)), "{err:?}");
        let err = CdpDriver::connect_with(&format!("ws://127.0.0.1:{port}/devtools/page/1"), opts)
            .unwrap_err();
        assert!(matches!(err, ConnectError::Unreachable(_)), "{err:?}");
    }
}
