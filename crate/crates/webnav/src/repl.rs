//! Line-oriented control channel. Only lines that open with the activation
//! phrase start a session; `:abort`, `:status` and `:quit` control it.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::backend::{HttpBackend, ScriptedBackend};
use crate::config::{AppConfig, BackendSpec};
use crate::driver::{CdpDriver, DriverOptions};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::session::{run_session, SessionConfig, SessionControl, SessionResult, SessionStatus};
use crate::speech::TextToSpeech;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FATAL: i32 = 3;

/// Starts the work behind one activated goal. Called on the session thread.
pub trait SessionLauncher: Send + Sync {
    fn launch(&self, session: u32, goal: &str, control: &SessionControl) -> SessionResult;
}

/// Returns the goal if `line` opens with `phrase` (ASCII case-insensitive)
/// followed by whitespace or the end of the line.
pub fn activated_goal<'a>(line: &'a str, phrase: &str) -> Option<&'a str> {
    let line = line.trim_start();
    let head = line.get(..phrase.len())?;
    if !head.eq_ignore_ascii_case(phrase) {
        return None;
    }
    let rest = &line[phrase.len()..];
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest.trim())
}

/// Transcript path for the `n`th session: the configured path for the
/// first, then `name-2.ext`, `name-3.ext`, ...
pub fn transcript_for(base: &Path, n: u32) -> PathBuf {
    if n <= 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{n}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{n}"),
    };
    base.with_file_name(name)
}

/// Connects to the configured browser and backend for each session.
#[derive(Debug, Clone)]
pub struct LiveLauncher {
    pub config: AppConfig,
    pub pipeline: PipelineConfig,
    pub driver: DriverOptions,
}

impl LiveLauncher {
    pub fn new(config: AppConfig) -> Self {
        Self {
            config,
            pipeline: PipelineConfig::default(),
            driver: DriverOptions::default(),
        }
    }

    fn pipeline(&self) -> Result<Pipeline, String> {
        let built = match &self.config.backend {
            BackendSpec::Scripted(path) => {
                let b = ScriptedBackend::load(path).map_err(|e| e.to_string())?;
                Pipeline::new(b.controller, b.assistant, self.pipeline.clone())
            }
            BackendSpec::Http(url) => {
                let http = HttpBackend::from_env(url.clone()).map_err(|e| e.to_string())?;
                Pipeline::new(http.clone(), http, self.pipeline.clone())
            }
        };
        built.map_err(|e| e.to_string())
    }
}

impl SessionLauncher for LiveLauncher {
    fn launch(&self, session: u32, goal: &str, control: &SessionControl) -> SessionResult {
        let fatal = |reason: String| SessionResult {
            status: SessionStatus::FatalError(reason),
            steps: Vec::new(),
            notes: Vec::new(),
        };
        let pipeline = match self.pipeline() {
            Ok(p) => p,
            Err(e) => return fatal(format!("backend: {e}")),
        };
        let mut driver = match CdpDriver::connect_with(&self.config.browser_endpoint, self.driver) {
            Ok(d) => d,
            Err(e) => return fatal(e.to_string()),
        };
        let cfg = SessionConfig {
            goal: goal.to_string(),
            max_steps: self.config.max_steps,
            verify: self.config.verify,
            transcript_path: transcript_for(&self.config.transcript_path, session),
            start_url: None,
        };
        run_session(&cfg, &pipeline, &mut driver, control)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplOptions {
    pub activation_phrase: String,
    pub voice_enabled: bool,
}

impl From<&AppConfig> for ReplOptions {
    fn from(c: &AppConfig) -> Self {
        Self {
            activation_phrase: c.activation_phrase.clone(),
            voice_enabled: c.voice_enabled,
        }
    }
}

struct Running {
    number: u32,
    control: SessionControl,
    handle: JoinHandle<SessionResult>,
}

struct Repl<'a, W: Write + Send + 'static> {
    opts: &'a ReplOptions,
    launcher: Arc<dyn SessionLauncher>,
    out: Arc<Mutex<W>>,
    tts: Arc<Mutex<dyn TextToSpeech>>,
    running: Option<Running>,
    launched: u32,
    any_fatal: bool,
}

impl<W: Write + Send + 'static> Repl<'_, W> {
    fn say(&self, msg: &str) {
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        let _ = writeln!(out, "{msg}");
        let _ = out.flush();
    }

    fn reap(&mut self, wait: bool) {
        let done = self
            .running
            .as_ref()
            .is_some_and(|r| wait || r.handle.is_finished());
        if !done {
            return;
        }
        let Some(r) = self.running.take() else { return };
        let status = match r.handle.join() {
            Ok(result) => result.status,
            Err(_) => SessionStatus::FatalError("session thread panicked".into()),
        };
        self.finished(r.number, &status);
    }

    fn finished(&mut self, number: u32, status: &SessionStatus) {
        if matches!(status, SessionStatus::FatalError(_)) {
            self.any_fatal = true;
        }
        let msg = format!("session {number} finished: {status}");
        self.say(&msg);
        if self.opts.voice_enabled {
            self.tts.lock().unwrap_or_else(|p| p.into_inner()).speak(&msg);
        }
    }

    fn launch(&mut self, goal: &str) {
        self.launched += 1;
        let number = self.launched;
        let control = SessionControl::new();
        let launcher = Arc::clone(&self.launcher);
        let goal = goal.to_string();
        let thread_control = control.clone();
        self.say(&format!("session {number} started: {goal}"));
        let spawned = std::thread::Builder::new()
            .name(format!("webnav-session-{number}"))
            .spawn(move || launcher.launch(number, &goal, &thread_control));
        match spawned {
            Ok(handle) => {
                self.running = Some(Running {
                    number,
                    control,
                    handle,
                });
            }
            Err(e) => self.finished(number, &SessionStatus::FatalError(e.to_string())),
        }
    }

    /// Handles one input line; false once the loop should stop.
    fn line(&mut self, line: &str) -> bool {
        self.reap(false);
        let trimmed = line.trim();
        match trimmed {
            "" => {}
            ":quit" => return false,
            ":abort" => match &self.running {
                Some(r) => {
                    r.control.abort();
                    self.say(&format!("session {}: abort requested", r.number));
                }
                None => self.say("no session is running"),
            },
            ":status" => match &self.running {
                Some(r) => self.say(&format!("session {} at step {}", r.number, r.control.current_step())),
                None => self.say("no session is running"),
            },
            _ => match activated_goal(trimmed, &self.opts.activation_phrase) {
                None => tracing::info!(line = trimmed, "ignored input without activation phrase"),
                Some("") => self.say("activation phrase heard but no goal given"),
                Some(_) if self.running.is_some() => self.say("a session is already running"),
                Some(goal) => self.launch(goal),
            },
        }
        true
    }
}

/// Reads commands until `:quit` or end of input, then waits for any running
/// session. Returns the process exit code.
pub fn repl_loop<R, W>(
    opts: &ReplOptions,
    launcher: Arc<dyn SessionLauncher>,
    input: R,
    out: Arc<Mutex<W>>,
    tts: Arc<Mutex<dyn TextToSpeech>>,
) -> i32
where
    R: BufRead,
    W: Write + Send + 'static,
{
    let mut repl = Repl {
        opts,
        launcher,
        out,
        tts,
        running: None,
        launched: 0,
        any_fatal: false,
    };
    for line in input.lines() {
        let Ok(line) = line else { break };
        if !repl.line(&line) {
            break;
        }
    }
    repl.reap(true);
    if repl.any_fatal {
        EXIT_FATAL
    } else {
        EXIT_OK
    }
}
