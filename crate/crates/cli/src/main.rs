use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn, LevelFilter};

use mir_cli::run::{bringup, recording_at, BringupOptions, ScratchDir};
use mir_core::config::BringupConfig;
use mir_core::daq::{replay_session, RecordingConfig, Session};
use mir_core::sim::{JoyScript, Sim};

const LOG_ENV: &str = "MIR_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "mir", version, about = "Software twin of the MIR ride-on-car")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Start the full vehicle graph.
    Bringup {
        /// YAML config; defaults apply to absent keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// World file, overriding the config's `world_file`.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Record a session, optionally into the given directory.
        #[arg(long, num_args = 0..=1, value_name = "DIR")]
        record: Option<Option<PathBuf>>,
        /// No WebSocket bridge.
        #[arg(long)]
        headless: bool,
        /// Stop after this many sim seconds.
        #[arg(long, value_name = "SECONDS")]
        duration: Option<f64>,
        /// Scripted joystick events.
        #[arg(long, value_name = "FILE")]
        script: Option<PathBuf>,
        /// Pace against the wall clock.
        #[arg(long)]
        realtime: bool,
        /// Bridge port, overriding the config's `bridge_port`.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Publish a recorded session back onto a fresh bus.
    Replay {
        session: PathBuf,
        /// Playback speed multiplier.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Record the replayed stream into this session directory.
        #[arg(long, value_name = "DIR")]
        record_to: Option<PathBuf>,
    },
    /// Print a session's manifest.
    Inspect { session: PathBuf },
    /// Print the standard node graph.
    Graph {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Graphviz output instead of an edge list.
        #[arg(long)]
        dot: bool,
    },
}

fn init_logging() -> Result<()> {
    let level = match std::env::var(LOG_ENV) {
        Ok(v) => match v.to_ascii_lowercase().as_str() {
            "error" => LevelFilter::Error,
            "warn" => LevelFilter::Warn,
            "info" => LevelFilter::Info,
            "debug" => LevelFilter::Debug,
            _ => bail!("{LOG_ENV} must be one of error, warn, info, debug; got {v:?}"),
        },
        Err(_) => LevelFilter::Info,
    };
    env_logger::Builder::new().filter_level(level).format_target(false).init();
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<BringupConfig> {
    match path {
        Some(p) => BringupConfig::load(p).with_context(|| format!("invalid config {}", p.display())),
        None => Ok(BringupConfig::default()),
    }
}

fn default_session_dir(base: Option<&RecordingConfig>) -> PathBuf {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let root = base.map(|b| b.output_dir.clone()).unwrap_or_else(|| RecordingConfig::default().output_dir);
    root.join(format!("session-{secs}"))
}

/// Writes to stdout; a closed pipe (`mir graph | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.context("cannot write to stdout"),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(value)?))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bringup(
    config: Option<PathBuf>,
    world: Option<PathBuf>,
    record: Option<Option<PathBuf>>,
    headless: bool,
    duration: Option<f64>,
    script: Option<PathBuf>,
    realtime: bool,
    port: Option<u16>,
) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(w) = world {
        cfg.world_file = Some(w);
    }
    if let Some(p) = port {
        cfg.bridge_port = p;
    }
    cfg.realtime |= realtime;
    if let Some(dir) = record {
        let dir = dir.unwrap_or_else(|| default_session_dir(cfg.daq.as_ref()));
        cfg.daq = Some(recording_at(cfg.daq.as_ref(), &dir));
    }
    cfg.validate().context("invalid config")?;
    if let Some(d) = duration {
        if !(d.is_finite() && d >= 0.0) {
            bail!("--duration must be a non-negative number of seconds, got {d}");
        }
    }
    let script = match script {
        Some(p) => JoyScript::load(&p)?,
        None => JoyScript::new(),
    };

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed)).context("cannot install signal handler")?;
    }
    let session_dir = cfg.daq.as_ref().map(RecordingConfig::session_dir);
    let report = bringup(BringupOptions { config: cfg, script, headless, duration }, stop)?;
    if let (Some(m), Some(dir)) = (&report.manifest, session_dir) {
        info!("session written to {}", dir.display());
        print_json(m)?;
    }
    Ok(())
}

fn cmd_replay(session: &Path, rate: f64, record_to: Option<PathBuf>) -> Result<()> {
    let s = Session::open(session)?;
    if s.corrupt_lines() > 0 {
        warn!("{}: skipped {} corrupt log lines", session.display(), s.corrupt_lines());
    }
    let rec = record_to.map(|dir| {
        let mut cfg = recording_at(None, &dir);
        cfg.topics.clear();
        cfg
    });
    let (summary, manifest) = replay_session(&s, rate, rec)?;
    print_json(&serde_json::json!({
        "published": summary.published,
        "corrupt": summary.corrupt,
        "duration": summary.duration,
        "recorded": manifest,
    }))
}

fn cmd_inspect(session: &Path) -> Result<()> {
    let s = Session::open(session)?;
    if s.corrupt_lines() > 0 {
        warn!("{}: {} corrupt log lines", session.display(), s.corrupt_lines());
    }
    print_json(s.manifest())
}

fn cmd_graph(config: Option<PathBuf>, dot: bool) -> Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    // The standard graph includes the recorder; point it at a scratch dir.
    let scratch = ScratchDir::new("graph")?;
    cfg.daq = Some(recording_at(cfg.daq.as_ref(), &scratch.path().join("session")));
    let sim = Sim::new(&cfg, JoyScript::new())?;
    let g = sim.bus().graph();
    sim.shutdown()?;
    if dot {
        return emit(&g.to_dot());
    }
    let mut out = format!(
        "nodes: {}\ntopics: {}\n",
        g.nodes.iter().cloned().collect::<Vec<_>>().join(" "),
        g.topics.iter().cloned().collect::<Vec<_>>().join(" ")
    );
    for (from, to) in &g.edges {
        out.push_str(&format!("{from} -> {to}\n"));
    }
    emit(&out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bringup { config, world, record, headless, duration, script, realtime, port } => {
            cmd_bringup(config, world, record, headless, duration, script, realtime, port)
        }
        Command::Replay { session, rate, record_to } => cmd_replay(&session, rate, record_to),
        Command::Inspect { session } => cmd_inspect(&session),
        Command::Graph { config, dot } => cmd_graph(config, dot),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
