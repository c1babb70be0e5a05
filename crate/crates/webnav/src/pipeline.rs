//! The two model stages. The Controller decides what to do next as one
//! terse command; the Assistant restates that command as a strict action
//! object, and is held to it.

use std::fmt::Write as _;

use webnav_core::{
    extract_command, parse_action_json, parse_command, render_command, to_action,
    ActionRequest, ControllerCommand, LabelMap, SchemaError,
};

use crate::backend::{BackendError, ModelBackend, PromptPart};
use crate::driver::ScreenshotPair;
use crate::transcript::StepRecord;

pub const DEFAULT_CONTROLLER_PROMPT: &str = "\
You are the Controller of a web navigation agent. You see the user's goal, \
the steps taken so far with their outcomes, any notes you have taken, and \
two screenshots of the current page: one plain and one with numbered labels \
on every interactive element, followed by a list of those labels.

Decide the single next step. Think briefly if you need to, then finish with \
exactly one command on its own line, using one of:
  Click [N]
  Type [N] \"text\"
  Note \"text\"
  Scroll up
  Scroll down
  END
N is a label number from the list. Inside quotes, write \\\" for a quote and \
\\\\ for a backslash. Write END when the goal is achieved. If a previous step \
was rejected or failed, take that into account.";

pub const DEFAULT_ASSISTANT_PROMPT: &str = "\
You are the Assistant of a web navigation agent. Convert the Controller's \
command into one JSON object and output nothing else. Do not change the \
decision. Shapes:
  {\"function\":\"Click\",\"parameters\":{\"number\":N}}
  {\"function\":\"Type\",\"parameters\":{\"number\":N,\"text\":\"...\"}}
  {\"function\":\"Note\",\"parameters\":{\"text\":\"...\"}}
  {\"function\":\"Scroll\",\"parameters\":{\"direction\":\"up\"|\"down\"}}
  {\"function\":\"End\",\"parameters\":{}}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub max_json_repairs: u32,
    pub controller_system_prompt: String,
    pub assistant_system_prompt: String,
    /// Also send both screenshots to the Assistant.
    pub assistant_images: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_json_repairs: 2,
            controller_system_prompt: DEFAULT_CONTROLLER_PROMPT.into(),
            assistant_system_prompt: DEFAULT_ASSISTANT_PROMPT.into(),
            assistant_images: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("model backend failed: {0}")]
    BackendFailure(#[from] BackendError),
    #[error("no command found in controller reply {0:?}")]
    NoCommandFound(String),
    #[error("assistant reply still invalid after repairs: {0}")]
    RepairExhausted(SchemaError),
    #[error("assistant changed the decision: expected {expected}, got {got}")]
    DecisionDrift {
        expected: ActionRequest,
        got: ActionRequest,
    },
    #[error("empty {0} system prompt")]
    EmptyPrompt(&'static str),
}

/// `[n] role "text"` per element; selectors stay out of prompts.
pub fn label_summary(map: &LabelMap) -> String {
    if map.is_empty() {
        return "No labeled elements are visible.".into();
    }
    let mut out = String::new();
    for el in &map.elements {
        let text = serde_json::to_string(&el.text).unwrap_or_default();
        let _ = writeln!(out, "[{}] {} {}", el.number, el.role, text);
    }
    out.truncate(out.trim_end().len());
    out
}

pub fn render_history(history: &[StepRecord]) -> String {
    if history.is_empty() {
        return "No steps taken yet.".into();
    }
    let mut out = String::new();
    for rec in history {
        let _ = write!(out, "{}. {} -> {}", rec.index, rec.command_text, rec.outcome);
        if let Some(d) = rec.verification {
            if d.is_unchanged() {
                out.push_str(" (page unchanged)");
            } else {
                let _ = write!(
                    out,
                    " (page changed: {} added, {} removed{})",
                    d.added,
                    d.removed,
                    if d.url_changed { ", new url" } else { "" }
                );
            }
        }
        out.push('\n');
    }
    out.truncate(out.trim_end().len());
    out
}

pub fn render_notes(notes: &[String]) -> String {
    if notes.is_empty() {
        return "No notes.".into();
    }
    notes
        .iter()
        .map(|n| format!("- {n}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn controller_prompt(
    cfg: &PipelineConfig,
    goal: &str,
    history: &[StepRecord],
    notes: &[String],
    pair: &ScreenshotPair,
) -> Vec<PromptPart> {
    vec![
        PromptPart::text(cfg.controller_system_prompt.clone()),
        PromptPart::text(format!("Goal: {goal}")),
        PromptPart::text(format!("Steps so far:\n{}", render_history(history))),
        PromptPart::text(format!("Notes:\n{}", render_notes(notes))),
        PromptPart::text(format!("Current page: {}", pair.label_map.url)),
        PromptPart::Image(pair.unlabeled.clone()),
        PromptPart::Image(pair.labeled.clone()),
        PromptPart::text(format!("Labels:\n{}", label_summary(&pair.label_map))),
    ]
}

/// One Controller call; the reply's last command line wins.
pub fn controller_step(
    backend: &dyn ModelBackend,
    cfg: &PipelineConfig,
    goal: &str,
    history: &[StepRecord],
    notes: &[String],
    pair: &ScreenshotPair,
) -> Result<ControllerCommand, PipelineError> {
    let reply = backend.complete(&controller_prompt(cfg, goal, history, notes, pair))?;
    let line = extract_command(&reply).map_err(|_| PipelineError::NoCommandFound(reply.clone()))?;
    parse_command(line).map_err(|_| PipelineError::NoCommandFound(reply.clone()))
}

fn assistant_prompt(
    cfg: &PipelineConfig,
    cmd: &ControllerCommand,
    pair: &ScreenshotPair,
) -> Vec<PromptPart> {
    let mut parts = vec![
        PromptPart::text(cfg.assistant_system_prompt.clone()),
        PromptPart::text(format!("Command: {}", render_command(cmd))),
        PromptPart::text(format!("Labels:\n{}", label_summary(&pair.label_map))),
    ];
    if cfg.assistant_images {
        parts.push(PromptPart::Image(pair.unlabeled.clone()));
        parts.push(PromptPart::Image(pair.labeled.clone()));
    }
    parts
}

/// Asks the Assistant to format `cmd`, re-prompting with the schema
/// reason on each invalid reply, at most `1 + max_json_repairs` calls.
pub fn assistant_step(
    backend: &dyn ModelBackend,
    cfg: &PipelineConfig,
    cmd: &ControllerCommand,
    pair: &ScreenshotPair,
) -> Result<ActionRequest, PipelineError> {
    let expected = to_action(cmd);
    let mut parts = assistant_prompt(cfg, cmd, pair);
    let mut attempt = 0;
    loop {
        let reply = backend.complete(&parts)?;
        match parse_action_json(&reply) {
            Ok(got) if got == expected => return Ok(got),
            Ok(got) => return Err(PipelineError::DecisionDrift { expected, got }),
            Err(e) if attempt >= cfg.max_json_repairs => {
                return Err(PipelineError::RepairExhausted(e))
            }
            Err(e) => {
                tracing::debug!(attempt, reason = e.reason.code(), "repairing assistant reply");
                parts.push(PromptPart::text(format!("Your reply: {reply}")));
                parts.push(PromptPart::text(format!(
                    "That reply was rejected ({}: {}). Reply with only the JSON object for: {}",
                    e.reason.code(),
                    e.detail,
                    render_command(cmd),
                )));
                attempt += 1;
            }
        }
    }
}

/// Both stages over their backends with a shared configuration.
pub struct Pipeline {
    controller: Box<dyn ModelBackend>,
    assistant: Box<dyn ModelBackend>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        controller: impl ModelBackend + 'static,
        assistant: impl ModelBackend + 'static,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        if config.controller_system_prompt.trim().is_empty() {
            return Err(PipelineError::EmptyPrompt("controller"));
        }
        if config.assistant_system_prompt.trim().is_empty() {
            return Err(PipelineError::EmptyPrompt("assistant"));
        }
        Ok(Self {
            controller: Box::new(controller),
            assistant: Box::new(assistant),
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn decide(
        &self,
        goal: &str,
        history: &[StepRecord],
        notes: &[String],
        pair: &ScreenshotPair,
    ) -> Result<ControllerCommand, PipelineError> {
        controller_step(&*self.controller, &self.config, goal, history, notes, pair)
    }

    pub fn format(&self, cmd: &ControllerCommand, pair: &ScreenshotPair) -> Result<ActionRequest, PipelineError> {
        assistant_step(&*self.assistant, &self.config, cmd, pair)
    }
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("config", &self.config).finish_non_exhaustive()
    }
}
