//! `everlab` command-line front end.
//!
//! Exit codes: 0 on pass or success, 1 when a verification fails or stays
//! inconclusive, 2 on usage or validation errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use everlab_core::emit::{emit, write_file, Tabular};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod options;

use config::{merge, output_path, Common, Options, RunSettings};
use options::{ConfirmOpts, DemoOpts, DutchbookOpts, DwVerifyOpts, ExtractOpts, GameEvalOpts};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "everlab",
    version,
    about = "Decision-theoretic probability experiments for branching quantum worlds",
    arg_required_else_help = true,
    propagate_version = true
)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file; relative paths resolve against $EVERLAB_OUT_DIR.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// json, csv or table [inferred from --out, else json].
    #[arg(long, global = true)]
    format: Option<String>,
    /// Seed for every randomized sweep [0].
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantum games.
    #[command(subcommand, arg_required_else_help = true)]
    Game(GameCommand),
    /// Staged checks of the Born-rule derivation.
    #[command(subcommand, arg_required_else_help = true)]
    Dw(DwCommand),
    /// Branch-counting incoherence.
    #[command(subcommand, arg_required_else_help = true)]
    Egal(EgalCommand),
    /// Diachronic Dutch book against a non-conditionalizing agent.
    Dutchbook(DutchbookOpts),
    /// Branching confirmation experiments.
    #[command(subcommand, arg_required_else_help = true)]
    Confirm(ConfirmCommand),
    /// Probability and utility from a preference ordering.
    Extract(ExtractOpts),
}

#[derive(Debug, Subcommand)]
enum GameCommand {
    /// Value a game under a strategy and realization(s).
    Eval(GameEvalOpts),
}

#[derive(Debug, Subcommand)]
enum DwCommand {
    /// Run one verification stage.
    Verify(DwVerifyOpts),
}

#[derive(Debug, Subcommand)]
enum EgalCommand {
    /// Rotate and coarse-grain a branch tree, tracking both valuations.
    Demo(DemoOpts),
}

#[derive(Debug, Subcommand)]
enum ConfirmCommand {
    /// Credence trajectories over a repeated game.
    Run(ConfirmOpts),
}

struct Run {
    name: &'static str,
    bytes: Vec<u8>,
    format: everlab_core::emit::Format,
    out: Option<PathBuf>,
    ok: bool,
}

fn prepare<T: Options>(opts: T, globals: &Common, config: Option<&PathBuf>) -> Result<(T, RunSettings), CliError> {
    merge(opts, globals.clone(), config.map(PathBuf::as_path))
}

fn finish<R: Serialize + Tabular>(name: &'static str, report: &R, ok: bool, settings: RunSettings) -> Result<Run, CliError> {
    let bytes = emit(report, settings.format).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Run {
        name,
        bytes,
        format: settings.format,
        out: settings.out,
        ok,
    })
}

fn dispatch(cli: Cli) -> Result<Run, CliError> {
    let globals = Common {
        seed: cli.seed,
        out: cli.out,
        format: cli.format,
    };
    let config = cli.config.as_ref();
    match cli.command {
        Command::Game(GameCommand::Eval(o)) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::game_eval(&o)?;
            finish("game-eval", &r, ok, s)
        }
        Command::Dw(DwCommand::Verify(o)) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::dw_verify(&o, s.seed)?;
            finish("dw-verify", &r, ok, s)
        }
        Command::Egal(EgalCommand::Demo(o)) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::egal_demo(&o, s.seed)?;
            finish("egal-demo", &r, ok, s)
        }
        Command::Dutchbook(o) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::dutchbook(&o, s.seed)?;
            finish("dutchbook", &r, ok, s)
        }
        Command::Confirm(ConfirmCommand::Run(o)) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::confirm_run(&o)?;
            finish("confirm-run", &r, ok, s)
        }
        Command::Extract(o) => {
            let (o, s) = prepare(o, &globals, config)?;
            let (r, ok) = commands::extract(&o, s.seed)?;
            finish("extract", &r, ok, s)
        }
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return e.exit_code();
        }
    };
    let result = dispatch(cli).and_then(|run| {
        match output_path(run.out.as_deref(), run.name, run.format) {
            Some(path) => {
                write_file(&path, &run.bytes).map_err(|e| CliError::Io(e.to_string()))?;
                let _ = writeln!(stderr, "wrote {}", path.display());
            }
            None => stdout
                .write_all(&run.bytes)
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))?,
        }
        Ok(run.ok)
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}
