//! `revstream` command-line tool.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use revstream::forge::{MixRatio, TierSelection};
use revstream::scope::Backend;
use revstream::{Mode, Profile};

#[derive(Debug, Parser)]
#[command(
    name = "revstream",
    version,
    about = "Render, build, simulate and audit revision streams"
)]
pub struct Cli {
    /// TOML file with defaults (flags and environment take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "REVSTREAM_SEED")]
    pub seed: Option<u64>,
    /// Tokenizer profile: char or word.
    #[arg(long, global = true, env = "REVSTREAM_PROFILE")]
    pub profile: Option<Profile>,
    /// Grammar mode: strict or lenient.
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a trajectory into the final program text.
    Render(RenderArgs),
    /// Build a trajectory dataset from function pairs.
    BuildData(BuildDataArgs),
    /// Run a simulated decoding session.
    Simulate(SimulateArgs),
    /// Closed-form and measured token costs.
    Cost(CostArgs),
    /// Pre/post-revision well-formedness matrix.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Trajectory text file, `-` for stdin.
    pub input: PathBuf,
    /// Write render events as JSONL.
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDataArgs {
    /// Function pairs, one JSON object per line.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub tier: Option<TierSelection>,
    #[arg(long)]
    pub latency_k: Option<usize>,
    /// Mixing ratio revision:general, e.g. 1:3.
    #[arg(long, requires = "general")]
    pub lambda: Option<MixRatio>,
    /// General instruction records (JSONL) to mix in.
    #[arg(long, requires = "lambda")]
    pub general: Option<PathBuf>,
    /// Merge change groups separated by fewer common tokens than this.
    #[arg(long)]
    pub merge_gap: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also write the summary JSON here.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScriptFormat {
    /// By extension: .jsonl/.json record, .tokens lines, anything else trajectory text.
    Auto,
    Trajectory,
    Lines,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Script file, or `stochastic` to sample from --table.
    #[arg(long)]
    pub policy: String,
    /// Weight table JSON for the stochastic policy.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScriptFormat::Auto)]
    pub format: ScriptFormat,
    /// Record to replay from a JSONL file (default: the first).
    #[arg(long)]
    pub record_id: Option<String>,
    /// Added to the trigger token's logit.
    #[arg(long, allow_hyphen_values = true)]
    pub bias: Option<f64>,
    #[arg(long, value_enum)]
    pub mask: Option<Switch>,
    /// Context length charged as input.
    #[arg(long = "L")]
    pub context_len: Option<u64>,
    #[arg(long)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub events_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long = "L", default_value_t = 0)]
    pub context_len: u64,
    #[arg(long = "Nv", default_value_t = 0)]
    pub n_v: u64,
    #[arg(long = "Ns", default_value_t = 0)]
    pub n_s: u64,
    /// Agent workflow with 3 or 4 steps; without it the single-pass cost is reported.
    #[arg(long, value_parser = clap::value_parser!(u8).range(3..=4))]
    pub agent: Option<u8>,
    /// Output tokens of the localization step (4-step agent).
    #[arg(long, default_value_t = 0)]
    pub loc_output: u64,
    /// Critic prompt size per repair step; repeatable.
    #[arg(long)]
    pub critic_prompt: Vec<u64>,
    /// Comma-separated context lengths for the scaling table (CSV output).
    #[arg(long, value_delimiter = ',')]
    pub scaling: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, requires = "post", conflicts_with = "dataset")]
    pub pre: Option<PathBuf>,
    #[arg(long, requires = "pre")]
    pub post: Option<PathBuf>,
    /// Dataset JSONL; pre is the draft before the record's episodes, post the rendered program.
    #[arg(long, required_unless_present = "pre")]
    pub dataset: Option<PathBuf>,
    /// `builtin` or `cmd:<command>`.
    #[arg(long, default_value = "builtin")]
    pub checker: String,
    /// Worker threads for checker calls.
    #[arg(long)]
    pub workers: Option<usize>,
}

/// A failed run and its exit status.
#[derive(Debug)]
pub enum Failure {
    Io(anyhow::Error),
    Grammar(String),
    EmptyDataset(String),
    InvalidScript(String),
    CheckerUnavailable(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Grammar(_) => 2,
            Failure::EmptyDataset(_) => 3,
            Failure::InvalidScript(_) => 4,
            Failure::CheckerUnavailable(_) => 5,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Io(e) => write!(f, "{e:#}"),
            Failure::Grammar(m) => write!(f, "grammar error: {m}"),
            Failure::EmptyDataset(m) => write!(f, "empty dataset: {m}"),
            Failure::InvalidScript(m) => write!(f, "invalid script: {m}"),
            Failure::CheckerUnavailable(m) => write!(f, "{m}"),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors share the I/O status so 2 stays reserved for grammar errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
