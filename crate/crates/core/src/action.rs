//! The strict JSON action object the Assistant produces, e.g.
//! `{"function":"Click","parameters":{"number":13}}`.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use core::fmt;

use serde_json::{Map, Value};

use crate::command::{ControllerCommand, Direction};
use crate::fence::strip_code_fence;
use crate::label_map::{LabelMap, LabelNumber, LabeledElement};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionRequest {
    Click { number: LabelNumber },
    Type { number: LabelNumber, text: String },
    Note { text: String },
    Scroll { direction: Direction },
    End,
}

impl ActionRequest {
    /// The `function` field value.
    pub fn function(&self) -> &'static str {
        match self {
            ActionRequest::Click { .. } => "Click",
            ActionRequest::Type { .. } => "Type",
            ActionRequest::Note { .. } => "Note",
            ActionRequest::Scroll { .. } => "Scroll",
            ActionRequest::End => "End",
        }
    }

    /// The label this action is grounded on, if any.
    pub fn label(&self) -> Option<LabelNumber> {
        match self {
            ActionRequest::Click { number } | ActionRequest::Type { number, .. } => Some(*number),
            _ => None,
        }
    }
}

impl fmt::Display for ActionRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&canonical_json(self))
    }
}

pub fn to_action(cmd: &ControllerCommand) -> ActionRequest {
    match cmd {
        ControllerCommand::Click(number) => ActionRequest::Click { number: *number },
        ControllerCommand::Type(number, text) => ActionRequest::Type {
            number: *number,
            text: text.clone(),
        },
        ControllerCommand::Note(text) => ActionRequest::Note { text: text.clone() },
        ControllerCommand::Scroll(direction) => ActionRequest::Scroll {
            direction: *direction,
        },
        ControllerCommand::End => ActionRequest::End,
    }
}

/// Machine-readable rejection reason; fed back to the model on repair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemaReason {
    MalformedJson,
    UnknownFunction,
    BadParameters,
}

impl SchemaReason {
    pub fn code(self) -> &'static str {
        match self {
            SchemaReason::MalformedJson => "MalformedJson",
            SchemaReason::UnknownFunction => "UnknownFunction",
            SchemaReason::BadParameters => "BadParameters",
        }
    }
}

impl fmt::Display for SchemaReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{reason}: {detail}")]
pub struct SchemaError {
    pub reason: SchemaReason,
    pub detail: String,
}

impl SchemaError {
    fn new(reason: SchemaReason, detail: impl Into<String>) -> Self {
        Self {
            reason,
            detail: detail.into(),
        }
    }
}

fn bad_params(detail: impl Into<String>) -> SchemaError {
    SchemaError::new(SchemaReason::BadParameters, detail)
}

/// Parses an action object, tolerating a surrounding markdown fence.
pub fn parse_action_json(text: &str) -> Result<ActionRequest, SchemaError> {
    let body = strip_code_fence(text);
    let value: Value = serde_json::from_str(body)
        .map_err(|e| SchemaError::new(SchemaReason::MalformedJson, e.to_string()))?;
    let Value::Object(mut top) = value else {
        return Err(SchemaError::new(
            SchemaReason::MalformedJson,
            "top level is not an object",
        ));
    };

    let function = match top.remove("function") {
        Some(Value::String(f)) => f,
        Some(_) => {
            return Err(SchemaError::new(
                SchemaReason::UnknownFunction,
                "\"function\" is not a string",
            ))
        }
        None => {
            return Err(SchemaError::new(
                SchemaReason::UnknownFunction,
                "missing \"function\"",
            ))
        }
    };
    let keys: &[&str] = match function.as_str() {
        "Click" => &["number"],
        "Type" => &["number", "text"],
        "Note" => &["text"],
        "Scroll" => &["direction"],
        "End" => &[],
        other => {
            return Err(SchemaError::new(
                SchemaReason::UnknownFunction,
                alloc::format!("unknown function {other:?}"),
            ))
        }
    };

    let mut params = match top.remove("parameters") {
        Some(Value::Object(p)) => p,
        Some(_) => return Err(bad_params("\"parameters\" is not an object")),
        None => return Err(bad_params("missing \"parameters\"")),
    };
    if let Some(extra) = top.keys().next() {
        return Err(bad_params(alloc::format!("unexpected top-level key {extra:?}")));
    }
    if let Some(extra) = params.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(bad_params(alloc::format!(
            "unexpected parameter {extra:?} for {function}"
        )));
    }

    Ok(match function.as_str() {
        "Click" => ActionRequest::Click {
            number: take_number(&mut params)?,
        },
        "Type" => ActionRequest::Type {
            number: take_number(&mut params)?,
            text: take_text(&mut params)?,
        },
        "Note" => ActionRequest::Note {
            text: take_text(&mut params)?,
        },
        "Scroll" => ActionRequest::Scroll {
            direction: match params.remove("direction") {
                Some(Value::String(d)) if d == "up" => Direction::Up,
                Some(Value::String(d)) if d == "down" => Direction::Down,
                Some(_) => return Err(bad_params("\"direction\" must be \"up\" or \"down\"")),
                None => return Err(bad_params("missing \"direction\"")),
            },
        },
        _ => ActionRequest::End,
    })
}

fn take_number(params: &mut Map<String, Value>) -> Result<LabelNumber, SchemaError> {
    match params.remove("number") {
        Some(Value::Number(n)) => n
            .as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .and_then(LabelNumber::new)
            .ok_or_else(|| bad_params(alloc::format!("\"number\" must be an integer >= 1, got {n}"))),
        Some(_) => Err(bad_params("\"number\" is not a number")),
        None => Err(bad_params("missing \"number\"")),
    }
}

fn take_text(params: &mut Map<String, Value>) -> Result<String, SchemaError> {
    match params.remove("text") {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(bad_params("\"text\" is not a string")),
        None => Err(bad_params("missing \"text\"")),
    }
}

fn push_json_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

/// Compact, byte-deterministic encoding. Keys: `function`, `parameters`;
/// parameter keys in the order number, text, direction.
pub fn canonical_json(a: &ActionRequest) -> String {
    use core::fmt::Write as _;

    let mut out = "{\"function\":".to_owned();
    push_json_str(&mut out, a.function());
    out.push_str(",\"parameters\":{");
    match a {
        ActionRequest::Click { number } => {
            let _ = write!(out, "\"number\":{number}");
        }
        ActionRequest::Type { number, text } => {
            let _ = write!(out, "\"number\":{number},\"text\":");
            push_json_str(&mut out, text);
        }
        ActionRequest::Note { text } => {
            out.push_str("\"text\":");
            push_json_str(&mut out, text);
        }
        ActionRequest::Scroll { direction } => {
            out.push_str("\"direction\":");
            push_json_str(&mut out, direction.as_str());
        }
        ActionRequest::End => {}
    }
    out.push_str("}}");
    out
}

/// An action bound to the element it targets in the current label map.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedAction {
    pub action: ActionRequest,
    pub target: Option<LabeledElement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("label {0} is not on the current page")]
    UnknownLabel(LabelNumber),
}

pub fn validate_action(a: &ActionRequest, m: &LabelMap) -> Result<ValidatedAction, ValidationError> {
    let target = match a.label() {
        Some(n) => Some(
            m.lookup(n.get())
                .cloned()
                .ok_or(ValidationError::UnknownLabel(n))?,
        ),
        None => None,
    };
    Ok(ValidatedAction {
        action: a.clone(),
        target,
    })
}
