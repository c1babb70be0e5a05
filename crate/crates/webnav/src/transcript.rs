//! Append-only JSONL session transcripts.
//!
//! One [`StepRecord`] per line, flushed as each step completes, followed by
//! a `{"notes": [...]}` footer once the session ends. Reading validates the
//! record invariants and reports the offending line number.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use webnav_core::{canonical_json, parse_command, render_command, to_action, MapDiff};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Executed,
    ValidationFailed(String),
    DriverFailed(String),
    Ended,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Executed => f.write_str("executed"),
            Outcome::ValidationFailed(r) => write!(f, "rejected: {r}"),
            Outcome::DriverFailed(r) => write!(f, "failed: {r}"),
            Outcome::Ended => f.write_str("ended"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub index: u32,
    pub command_text: String,
    pub action_json: String,
    pub outcome: Outcome,
    pub verification: Option<MapDiff>,
    pub started_at: String,
    pub ended_at: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NotesFooter {
    notes: Vec<String>,
}

/// A transcript as read back from disk.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
    /// `None` when the session did not reach its footer.
    pub notes: Option<Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl TranscriptError {
    pub fn line(&self) -> Option<usize> {
        match self {
            TranscriptError::Io(_) => None,
            TranscriptError::Malformed { line, .. } | TranscriptError::Invalid { line, .. } => Some(*line),
        }
    }
}

/// Opens a fresh transcript and appends to it one flushed line at a time.
#[derive(Debug)]
pub struct TranscriptWriter {
    file: File,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Self {
            file: File::create(path)?,
        })
    }

    fn line<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        let mut bytes = serde_json::to_vec(value).map_err(io::Error::other)?;
        bytes.push(b'\n');
        self.file.write_all(&bytes)?;
        self.file.flush()
    }

    pub fn append(&mut self, record: &StepRecord) -> io::Result<()> {
        self.line(record)
    }

    pub fn finish(mut self, notes: &[String]) -> io::Result<()> {
        self.line(&NotesFooter {
            notes: notes.to_vec(),
        })?;
        self.file.sync_data()
    }
}

/// Appends one record to the transcript at `path`.
pub fn write_transcript_record(path: &Path, record: &StepRecord) -> io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut bytes = serde_json::to_vec(record).map_err(io::Error::other)?;
    bytes.push(b'\n');
    file.write_all(&bytes)?;
    file.flush()
}

fn check_record(rec: &StepRecord, expected_index: u32) -> Result<(), String> {
    if rec.index != expected_index {
        return Err(format!("index {} where {expected_index} was expected", rec.index));
    }
    let cmd = parse_command(&rec.command_text)
        .map_err(|e| format!("command_text {:?}: {e}", rec.command_text))?;
    if render_command(&cmd) != rec.command_text {
        return Err(format!("command_text {:?} is not canonical", rec.command_text));
    }
    let expected_json = canonical_json(&to_action(&cmd));
    if rec.action_json != expected_json {
        return Err(format!(
            "action_json {:?} does not match command (expected {expected_json:?})",
            rec.action_json
        ));
    }
    for (name, ts) in [("started_at", &rec.started_at), ("ended_at", &rec.ended_at)] {
        chrono::DateTime::parse_from_rfc3339(ts).map_err(|e| format!("{name} {ts:?}: {e}"))?;
    }
    if rec.outcome == Outcome::Ended && rec.verification.is_some() {
        return Err("an Ended record carries no verification".into());
    }
    Ok(())
}

pub fn parse_transcript(reader: impl BufRead) -> Result<Transcript, TranscriptError> {
    let mut out = Transcript::default();
    let mut ended = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let invalid = |message: String| TranscriptError::Invalid {
            line: line_no,
            message,
        };
        if out.notes.is_some() {
            return Err(invalid("content after the notes footer".into()));
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| TranscriptError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if value.get("notes").is_some() {
            let footer: NotesFooter = serde_json::from_value(value).map_err(|e| invalid(e.to_string()))?;
            out.notes = Some(footer.notes);
            continue;
        }
        let rec: StepRecord = serde_json::from_value(value).map_err(|e| invalid(e.to_string()))?;
        if ended {
            return Err(invalid("record after an Ended record".into()));
        }
        check_record(&rec, out.steps.len() as u32 + 1).map_err(invalid)?;
        ended = rec.outcome == Outcome::Ended;
        out.steps.push(rec);
    }
    Ok(out)
}

pub fn read_transcript(path: &Path) -> Result<Transcript, TranscriptError> {
    parse_transcript(BufReader::new(File::open(path)?))
}

/// Blanks the timestamp fields of every line, for run-to-run comparison.
pub fn without_timestamps(jsonl: &str) -> String {
    jsonl
        .lines()
        .map(|line| match serde_json::from_str::<serde_json::Value>(line) {
            Ok(mut v) => {
                if let Some(obj) = v.as_object_mut() {
                    for key in ["started_at", "ended_at"] {
                        if obj.contains_key(key) {
                            obj.insert(key.into(), serde_json::Value::String(String::new()));
                        }
                    }
                }
                v.to_string()
            }
            Err(_) => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(index: u32, cmd: &str, outcome: Outcome) -> StepRecord {
        let c = parse_command(cmd).unwrap();
        StepRecord {
            index,
            command_text: render_command(&c),
            action_json: canonical_json(&to_action(&c)),
            verification: (outcome == Outcome::Executed).then(MapDiff::default),
            outcome,
            started_at: "2026-01-01T00:00:00.000Z".into(),
            ended_at: "2026-01-01T00:00:00.250Z".into(),
        }
    }

    #[test]
    fn outcome_wire_form() {
        assert_eq!(serde_json::to_string(&Outcome::Executed).unwrap(), r#""Executed""#);
        assert_eq!(
            serde_json::to_string(&Outcome::ValidationFailed("x".into())).unwrap(),
            r#"{"ValidationFailed":"x"}"#
        );
    }

    #[test]
    fn record_field_names() {
        let v = serde_json::to_value(rec(1, "Click [2]", Outcome::Executed)).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = vec![
            "index", "command_text", "action_json", "outcome", "verification", "started_at", "ended_at",
        ];
        expected.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expected);
    }

    #[test]
    fn rejects_gaps_and_late_records() {
        let a = serde_json::to_string(&rec(1, "Click [2]", Outcome::Executed)).unwrap();
        let c = serde_json::to_string(&rec(3, "END", Outcome::Ended)).unwrap();
        let err = parse_transcript(format!("{a}\n{c}\n").as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(2));

        let end = serde_json::to_string(&rec(1, "END", Outcome::Ended)).unwrap();
        let more = serde_json::to_string(&rec(2, "END", Outcome::Ended)).unwrap();
        let err = parse_transcript(format!("{end}\n{more}\n").as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(2));
    }

    #[test]
    fn rejects_non_canonical_action() {
        let mut r = rec(1, "Click [2]", Outcome::Executed);
        r.action_json = r#"{"function": "Click", "parameters": {"number": 2}}"#.into();
        let line = serde_json::to_string(&r).unwrap();
        assert!(matches!(
            parse_transcript(line.as_bytes()),
            Err(TranscriptError::Invalid { line: 1, .. })
        ));
    }
}
