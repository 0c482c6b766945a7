//! `penhance`: enhancement, pitch extraction, evaluation and filterbank
//! inspection on mono WAV files.

mod audio;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use periodic_enhance::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<periodic_enhance::Error> for CliError {
    fn from(e: periodic_enhance::Error) -> Self {
        use periodic_enhance::Error as E;
        match e {
            E::Design(_) | E::Config(_) | E::Shape(_) | E::Contract(_) => {
                CliError::Config(e.to_string())
            }
            E::Eval(_) => CliError::Io(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "penhance",
    version,
    about = "Online periodicity-based speech enhancement"
)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance a noisy recording.
    Enhance(commands::EnhanceArgs),
    /// Write the per-frame F0 track.
    Pitch(commands::PitchArgs),
    /// Score enhanced audio or a pitch track against references.
    Eval(commands::EvalArgs),
    /// Print the filterbank coefficient table.
    Design,
    /// Print the effective configuration.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.load()?;
    match cli.command {
        Command::Enhance(args) => commands::enhance(&cfg, &args),
        Command::Pitch(args) => commands::pitch(&cfg, &args),
        Command::Eval(args) => commands::eval(&cfg, &args),
        Command::Design => commands::design(&cfg),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("penhance: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
