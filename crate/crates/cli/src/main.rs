//! `fbgsense`: dataset generation, training, evaluation and one-shot
//! reconstruction from a TOML run configuration.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbg_core::nn::EncoderKind;
use fbg_core::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "fbgsense", version, about = "Shape and contact-force sensing with a helical FBG fiber")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the static train/test split and the dynamic trajectories.
    Gen,
    /// Train one encoder on the training split.
    Train {
        #[arg(long, value_parser = parse_encoder)]
        encoder: EncoderKind,
    },
    /// Evaluate methods on the test split and the dynamic trajectories.
    Eval {
        /// Comma-separated: model, fc, lstm, conv1d. Defaults to the config.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
    /// Shape and force for one strain frame.
    Reconstruct {
        /// One strain value per line.
        #[arg(long)]
        input: PathBuf,
        /// Straight-rod acquisition in the same format; the simulated one when omitted.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// model, fc, lstm or conv1d.
        #[arg(long, default_value = "model")]
        method: String,
        /// Output file; `reconstruction.csv` in the output directory by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse().map_err(|e: fbg_core::Error| e.to_string())
}

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    fn code(&self) -> u8 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }

    fn label(&self) -> &'static str {
        match self.kind {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numeric => "numeric",
        }
    }
}

impl From<fbg_core::Error> for CliError {
    fn from(e: fbg_core::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error code={} kind={}: {}", self.code(), self.label(), config::one_line(&self.message))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Train { encoder } => commands::train(&cfg, encoder),
        Command::Eval { methods } => commands::eval(&cfg, methods.as_deref()),
        Command::Reconstruct {
            input,
            baseline,
            method,
            output,
        } => commands::reconstruct(&cfg, &input, baseline.as_deref(), &method, output.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
