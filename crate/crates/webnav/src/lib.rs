//! Agent runtime that turns a natural-language goal into grounded browser
//! actions: perceive the page (screenshots plus a numbered label map), ask
//! the Controller model for the next step, have the Assistant model format
//! it as a strict action object, execute it over the DevTools protocol, and
//! record what changed.

pub mod backend;
mod cdp;
pub mod config;
pub mod driver;
pub mod fake;
pub mod pipeline;
pub mod repl;
pub mod scripts;
pub mod session;
pub mod speech;
pub mod transcript;

pub use cdp::Event;
pub use driver::{Browser, CdpDriver, ConnectError, DriverError, DriverOptions, Png, ScreenshotPair};
pub use pipeline::{Pipeline, PipelineConfig, PipelineError};
pub use session::{run_session, SessionConfig, SessionControl, SessionResult, SessionStatus};
pub use transcript::{Outcome, StepRecord};
