//! The perceive, decide, act, verify loop.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::Arc;

use webnav_core::{
    canonical_json, diff_maps, render_command, to_action, validate_action, ActionRequest,
    ControllerCommand,
};

use crate::driver::{Browser, DriverError, ScreenshotPair};
use crate::pipeline::{Pipeline, PipelineError};
use crate::transcript::{Outcome, StepRecord, TranscriptWriter};

pub const DEFAULT_MAX_STEPS: u32 = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub goal: String,
    pub max_steps: u32,
    pub verify: bool,
    pub transcript_path: PathBuf,
    pub start_url: Option<String>,
}

impl SessionConfig {
    pub fn new(goal: impl Into<String>, transcript_path: impl Into<PathBuf>) -> Self {
        Self {
            goal: goal.into(),
            max_steps: DEFAULT_MAX_STEPS,
            verify: true,
            transcript_path: transcript_path.into(),
            start_url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStatus {
    CompletedByEnd,
    StepBudgetExhausted,
    AbortedByUser,
    FatalError(String),
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SessionStatus::CompletedByEnd => f.write_str("completed"),
            SessionStatus::StepBudgetExhausted => f.write_str("step budget exhausted"),
            SessionStatus::AbortedByUser => f.write_str("aborted"),
            SessionStatus::FatalError(r) => write!(f, "fatal error: {r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionResult {
    pub status: SessionStatus,
    pub steps: Vec<StepRecord>,
    pub notes: Vec<String>,
}

/// State shared with whoever launched the session: a cooperative abort
/// flag, checked between steps, and the index of the step in progress.
#[derive(Debug, Clone, Default)]
pub struct SessionControl {
    abort: Arc<AtomicBool>,
    step: Arc<AtomicU32>,
}

impl SessionControl {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn abort(&self) {
        self.abort.store(true, Ordering::SeqCst);
    }

    pub fn is_aborted(&self) -> bool {
        self.abort.load(Ordering::SeqCst)
    }

    /// Index of the step in progress, or 0 before the first.
    pub fn current_step(&self) -> u32 {
        self.step.load(Ordering::SeqCst)
    }
}

pub fn take_note(notes: &mut Vec<String>, text: &str) {
    notes.push(text.to_string());
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct Run<'a, B: Browser + ?Sized> {
    cfg: &'a SessionConfig,
    pipeline: &'a Pipeline,
    browser: &'a mut B,
    control: &'a SessionControl,
    writer: TranscriptWriter,
    steps: Vec<StepRecord>,
    notes: Vec<String>,
}

enum Step {
    Continue(Option<ScreenshotPair>),
    Stop(SessionStatus),
}

impl<B: Browser + ?Sized> Run<'_, B> {
    fn record(&mut self, rec: StepRecord) -> Result<(), SessionStatus> {
        self.writer
            .append(&rec)
            .map_err(|e| SessionStatus::FatalError(format!("writing transcript: {e}")))?;
        self.steps.push(rec);
        Ok(())
    }

    fn step(&mut self, pair: ScreenshotPair) -> Result<Step, SessionStatus> {
        let index = self.steps.len() as u32 + 1;
        self.control.step.store(index, Ordering::SeqCst);
        let started_at = now();
        let fatal = |e: PipelineError| SessionStatus::FatalError(e.to_string());

        let cmd = self
            .pipeline
            .decide(&self.cfg.goal, &self.steps, &self.notes, &pair)
            .map_err(fatal)?;
        let expected = to_action(&cmd);
        let mut rec = StepRecord {
            index,
            command_text: render_command(&cmd),
            action_json: canonical_json(&expected),
            outcome: Outcome::Ended,
            verification: None,
            started_at,
            ended_at: String::new(),
        };
        if cmd == ControllerCommand::End {
            rec.ended_at = now();
            self.record(rec)?;
            return Ok(Step::Stop(SessionStatus::CompletedByEnd));
        }

        let action = match self.pipeline.format(&cmd, &pair) {
            Ok(a) => a,
            Err(PipelineError::DecisionDrift { got, .. }) => {
                rec.outcome = Outcome::ValidationFailed(format!(
                    "assistant produced {} instead of {}",
                    canonical_json(&got),
                    rec.action_json
                ));
                rec.ended_at = now();
                self.record(rec)?;
                return Ok(Step::Continue(Some(pair)));
            }
            Err(e) => return Err(fatal(e)),
        };

        let validated = match validate_action(&action, &pair.label_map) {
            Ok(v) => v,
            Err(e) => {
                rec.outcome = Outcome::ValidationFailed(e.to_string());
                rec.ended_at = now();
                self.record(rec)?;
                return Ok(Step::Continue(Some(pair)));
            }
        };

        let result: Result<(), DriverError> = match (&validated.action, &validated.target) {
            (ActionRequest::Click { .. }, Some(t)) => self.browser.execute_click(t),
            (ActionRequest::Type { text, .. }, Some(t)) => self.browser.execute_type(t, text),
            (ActionRequest::Scroll { direction }, _) => self.browser.execute_scroll(*direction),
            (ActionRequest::Note { text }, _) => {
                take_note(&mut self.notes, text);
                Ok(())
            }
            _ => unreachable!("validated actions with a label carry a target"),
        };
        if let Err(e) = result {
            rec.outcome = Outcome::DriverFailed(e.to_string());
            rec.ended_at = now();
            self.record(rec)?;
            if e.is_recoverable() {
                return Ok(Step::Continue(None));
            }
            return Err(SessionStatus::FatalError(e.to_string()));
        }

        rec.outcome = Outcome::Executed;
        let next = if self.cfg.verify {
            let after = self.perceive()?;
            rec.verification = Some(diff_maps(&pair.label_map, &after.label_map));
            Some(after)
        } else {
            None
        };
        rec.ended_at = now();
        self.record(rec)?;
        Ok(Step::Continue(next))
    }

    fn perceive(&mut self) -> Result<ScreenshotPair, SessionStatus> {
        self.browser
            .perceive()
            .map_err(|e| SessionStatus::FatalError(format!("perceive failed: {e}")))
    }

    fn run(&mut self) -> SessionStatus {
        if let Some(url) = &self.cfg.start_url {
            if let Err(e) = self.browser.navigate(url) {
                return SessionStatus::FatalError(format!("navigating to {url}: {e}"));
            }
        }
        let mut cached: Option<ScreenshotPair> = None;
        loop {
            if self.control.is_aborted() {
                return SessionStatus::AbortedByUser;
            }
            if self.steps.len() as u32 >= self.cfg.max_steps {
                return SessionStatus::StepBudgetExhausted;
            }
            let pair = match cached.take() {
                Some(p) => p,
                None => match self.perceive() {
                    Ok(p) => p,
                    Err(s) => return s,
                },
            };
            match self.step(pair) {
                Ok(Step::Continue(next)) => cached = next,
                Ok(Step::Stop(status)) | Err(status) => return status,
            }
        }
    }
}

/// Runs one session to completion, writing the transcript as it goes.
pub fn run_session<B: Browser + ?Sized>(
    cfg: &SessionConfig,
    pipeline: &Pipeline,
    browser: &mut B,
    control: &SessionControl,
) -> SessionResult {
    if cfg.goal.trim().is_empty() {
        return SessionResult {
            status: SessionStatus::FatalError("empty goal".into()),
            steps: Vec::new(),
            notes: Vec::new(),
        };
    }
    let writer = match TranscriptWriter::create(&cfg.transcript_path) {
        Ok(w) => w,
        Err(e) => {
            return SessionResult {
                status: SessionStatus::FatalError(format!(
                    "creating transcript {}: {e}",
                    cfg.transcript_path.display()
                )),
                steps: Vec::new(),
                notes: Vec::new(),
            }
        }
    };
    let mut run = Run {
        cfg,
        pipeline,
        browser,
        control,
        writer,
        steps: Vec::new(),
        notes: Vec::new(),
    };
    let mut status = run.run();
    let Run {
        writer, steps, notes, ..
    } = run;
    if let Err(e) = writer.finish(&notes) {
        if !matches!(status, SessionStatus::FatalError(_)) {
            status = SessionStatus::FatalError(format!("writing transcript footer: {e}"));
        }
    }
    tracing::info!(%status, steps = steps.len(), "session finished");
    SessionResult {
        status,
        steps,
        notes,
    }
}
