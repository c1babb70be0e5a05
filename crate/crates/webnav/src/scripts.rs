//! Page scripts the driver evaluates over `Runtime.evaluate`.
//!
//! Every script starts with a one-line header comment,
//! `// webnav:<op> <args-json>`, followed by a self-contained expression that
//! applies a function to the same JSON arguments. The header lets tooling
//! (and the fake protocol server) identify a script without a JS engine.

use serde_json::{json, Value};
use webnav_core::command::Direction;
use webnav_core::contract::{BASE_SELECTOR, CANDIDATE_SELECTOR, MAX_TEXT_CHARS};

/// The labeler asset, shared with the browser extension.
pub const LABELER_JS: &str = include_str!("../assets/labeler.js");

/// Element id of the badge container the labeler injects.
pub const OVERLAY_ID: &str = "__webnav_labels";

/// Fraction of the viewport height one scroll step moves.
pub const SCROLL_FRACTION: f64 = 0.8;

const HEADER_PREFIX: &str = "// webnav:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptOp {
    Labeler,
    ClearLabels,
    Click,
    Type,
    Scroll,
    Probe,
}

impl ScriptOp {
    pub fn name(self) -> &'static str {
        match self {
            ScriptOp::Labeler => "labeler",
            ScriptOp::ClearLabels => "clear-labels",
            ScriptOp::Click => "click",
            ScriptOp::Type => "type",
            ScriptOp::Scroll => "scroll",
            ScriptOp::Probe => "probe",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            ScriptOp::Labeler,
            ScriptOp::ClearLabels,
            ScriptOp::Click,
            ScriptOp::Type,
            ScriptOp::Scroll,
            ScriptOp::Probe,
        ]
        .into_iter()
        .find(|op| op.name() == name)
    }
}

const CLEAR_LABELS_JS: &str = r#"(function (args) {
  var o = document.getElementById(args.overlayId);
  if (o) o.remove();
  return { ok: true };
})"#;

const CLICK_JS: &str = r#"(function (args) {
  var found;
  try { found = document.querySelectorAll(args.selector); } catch (e) { return { ok: false, error: 'stale' }; }
  if (found.length !== 1) return { ok: false, error: 'stale' };
  var el = found[0];
  if (typeof el.focus === 'function') el.focus();
  el.click();
  return { ok: true };
})"#;

const TYPE_JS: &str = r#"(function (args) {
  var found;
  try { found = document.querySelectorAll(args.selector); } catch (e) { return { ok: false, error: 'stale' }; }
  if (found.length !== 1) return { ok: false, error: 'stale' };
  var el = found[0];
  var tag = el.tagName;
  var nonText = ['button', 'submit', 'reset', 'checkbox', 'radio', 'file', 'image', 'hidden', 'range', 'color'];
  var field = tag === 'TEXTAREA' ||
    (tag === 'INPUT' && nonText.indexOf((el.getAttribute('type') || 'text').toLowerCase()) < 0);
  if (!(field || el.isContentEditable) || el.disabled || el.readOnly) {
    return { ok: false, error: 'not-editable' };
  }
  el.focus();
  if (field) { el.value = ''; el.value = args.text; } else { el.textContent = args.text; }
  el.dispatchEvent(new Event('input', { bubbles: true }));
  el.dispatchEvent(new Event('change', { bubbles: true }));
  return { ok: true };
})"#;

const SCROLL_JS: &str = r#"(function (args) {
  var o = document.getElementById(args.overlayId);
  if (o) o.remove();
  window.scrollBy(0, args.sign * Math.round(window.innerHeight * args.fraction));
  return { ok: true, scrollY: window.scrollY };
})"#;

const PROBE_JS: &str = r#"(function (args) {
  var out = { url: location.href, title: document.title, scrollY: window.scrollY };
  if (args.selector) {
    var found = document.querySelectorAll(args.selector);
    out.matches = found.length;
    if (found.length === 1) {
      var el = found[0];
      out.value = typeof el.value === 'string' ? el.value : null;
      out.clicks = parseInt(el.getAttribute('data-clicks') || '0', 10);
    }
  }
  return out;
})"#;

fn assemble(op: ScriptOp, body: &str, args: &Value) -> String {
    let args = args.to_string();
    format!("{HEADER_PREFIX}{} {args}\n({body})({args})", op.name())
}

pub fn labeler() -> String {
    assemble(
        ScriptOp::Labeler,
        LABELER_JS.trim_end(),
        &json!({
            "maxText": MAX_TEXT_CHARS,
            "overlayId": OVERLAY_ID,
            "selector": CANDIDATE_SELECTOR,
            "baseSelector": BASE_SELECTOR,
        }),
    )
}

pub fn clear_labels() -> String {
    assemble(ScriptOp::ClearLabels, CLEAR_LABELS_JS, &json!({ "overlayId": OVERLAY_ID }))
}

pub fn click(selector: &str) -> String {
    assemble(ScriptOp::Click, CLICK_JS, &json!({ "selector": selector }))
}

pub fn type_text(selector: &str, text: &str) -> String {
    assemble(ScriptOp::Type, TYPE_JS, &json!({ "selector": selector, "text": text }))
}

pub fn scroll(direction: Direction) -> String {
    let sign = match direction {
        Direction::Up => -1,
        Direction::Down => 1,
    };
    assemble(
        ScriptOp::Scroll,
        SCROLL_JS,
        &json!({ "sign": sign, "fraction": SCROLL_FRACTION, "overlayId": OVERLAY_ID }),
    )
}

pub fn probe(selector: Option<&str>) -> String {
    assemble(ScriptOp::Probe, PROBE_JS, &json!({ "selector": selector }))
}

/// Recognizes a driver script by its header line.
pub fn parse_header(source: &str) -> Option<(ScriptOp, Value)> {
    let first = source.lines().next()?;
    let rest = first.strip_prefix(HEADER_PREFIX)?;
    let (name, args) = rest.split_once(' ')?;
    let op = ScriptOp::from_name(name)?;
    let args = serde_json::from_str(args).ok()?;
    Some((op, args))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_round_trip() {
        let src = type_text("#name", "a \"quoted\"\nline");
        let (op, args) = parse_header(&src).unwrap();
        assert_eq!(op, ScriptOp::Type);
        assert_eq!(args["selector"], "#name");
        assert_eq!(args["text"], "a \"quoted\"\nline");
        assert_eq!(src.lines().count(), TYPE_JS.lines().count() + 1);

        let (op, args) = parse_header(&scroll(Direction::Up)).unwrap();
        assert_eq!(op, ScriptOp::Scroll);
        assert_eq!(args["sign"], -1);

        let (op, args) = parse_header(&labeler()).unwrap();
        assert_eq!(op, ScriptOp::Labeler);
        assert_eq!(args["maxText"], 120);
    }

    #[test]
    fn plain_expressions_have_no_header() {
        assert!(parse_header("1+1").is_none());
        assert!(parse_header("// webnav:unknown {}\n1").is_none());
    }

    #[test]
    fn labeler_asset_is_a_function_expression() {
        let body = LABELER_JS.trim();
        assert!(body.lines().any(|l| l.starts_with("(function (options)")));
        assert!(body.ends_with("})"));
    }
}
