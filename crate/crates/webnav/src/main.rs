use std::io::{self, BufRead};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use webnav::config::{load_config, process_env, ConfigOverrides};
use webnav::fake::{load_fixture_dir, FakeBrowser, FakeConfig};
use webnav::repl::{repl_loop, LiveLauncher, ReplOptions, EXIT_CONFIG};
use webnav::speech::NullTextToSpeech;

/// Goal-driven browser agent. Reads lines from stdin; a line that starts
/// with the activation phrase launches a session toward the rest of it.
#[derive(Debug, Parser)]
#[command(name = "webnav", version)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat JSON config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Browser debugging endpoint (http://host:port or a ws:// page URL).
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,

    /// `scripted:PATH` or `http:URL`.
    #[arg(long, value_name = "SPEC")]
    backend: Option<String>,

    #[arg(long, value_name = "N")]
    max_steps: Option<u32>,

    /// Re-perceive after each action and record what changed (default).
    #[arg(long, overrides_with = "no_verify")]
    verify: bool,

    #[arg(long)]
    no_verify: bool,

    #[arg(long, value_name = "PATH")]
    transcript: Option<PathBuf>,

    /// Speak session results.
    #[arg(long, overrides_with = "no_voice")]
    voice: bool,

    #[arg(long)]
    no_voice: bool,

    #[arg(long, value_name = "PHRASE")]
    activation: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve fixture pages over the debugging protocol until interrupted.
    ServeFake {
        /// Directory of fixture page JSON files.
        #[arg(long, value_name = "DIR")]
        fixtures: PathBuf,

        #[arg(long, default_value = "127.0.0.1:9222")]
        bind: String,

        /// Page to show first.
        #[arg(long, value_name = "URL")]
        start: Option<String>,
    },
}

fn flag(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            browser_endpoint: self.endpoint.clone(),
            backend: self.backend.clone(),
            max_steps: self.max_steps,
            verify: flag(self.verify, self.no_verify),
            activation_phrase: self.activation.clone(),
            voice_enabled: flag(self.voice, self.no_voice),
            transcript_path: self.transcript.clone(),
        }
    }
}

fn serve_fake(fixtures: PathBuf, bind: &str, start: Option<String>) -> i32 {
    let pages = match load_fixture_dir(&fixtures) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("webnav: {}: {e}", fixtures.display());
            return EXIT_CONFIG;
        }
    };
    let config = FakeConfig {
        start_url: start,
        ..FakeConfig::with_pages(pages)
    };
    match FakeBrowser::start_on(bind, config) {
        Ok(fake) => {
            println!("{}", fake.http_endpoint());
            // Serve until stdin closes.
            for _ in io::stdin().lock().lines() {}
            0
        }
        Err(e) => {
            eprintln!("webnav: cannot bind {bind}: {e}");
            EXIT_CONFIG
        }
    }
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("WEBNAV_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();

    let code = match cli.command {
        Some(Command::ServeFake {
            fixtures,
            bind,
            start,
        }) => serve_fake(fixtures, &bind, start),
        None => match load_config(cli.run.config.as_deref(), &cli.run.overrides(), &process_env) {
            Err(e) => {
                eprintln!("webnav: configuration error: {e}");
                EXIT_CONFIG
            }
            Ok(config) => {
                let opts = ReplOptions::from(&config);
                let launcher = Arc::new(LiveLauncher::new(config));
                repl_loop(
                    &opts,
                    launcher,
                    io::stdin().lock(),
                    Arc::new(Mutex::new(io::stdout())),
                    Arc::new(Mutex::new(NullTextToSpeech)),
                )
            }
        },
    };
    std::process::exit(code);
}
