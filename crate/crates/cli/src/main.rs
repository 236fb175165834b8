mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Dependency-ordered porting of C code to Checked C with a language model.
#[derive(Debug, Parser)]
#[command(name = "ccport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// Parsed once per process; the size difference between variants is irrelevant.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
enum Command {
    /// Print the declaration dependency graph and visit order as JSON.
    Graph(GraphArgs),
    /// Port the inputs and write the result under --out.
    Port(PortArgs),
    /// Score a ported tree against ground-truth annotations.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Input files or directories (searched for .c and .h files).
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    /// File listing one input path per line.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `key = value` file with defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PortArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Output directory; mirrors the input layout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// mock, replay, http or scripted.
    #[arg(long)]
    backend: Option<String>,
    /// Completions sampled per query.
    #[arg(long)]
    completions: Option<usize>,
    /// Passes to run, e.g. `1,2,3` or `2`.
    #[arg(long)]
    passes: Option<String>,
    /// Replay store directory read by the replay backend.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Prompt budget in estimated tokens.
    #[arg(long)]
    budget: Option<usize>,
    /// Checked pointer spelling of modified code: short or long.
    #[arg(long)]
    spelling: Option<String>,
    /// Directory for prompts, query records and pass reports.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// JSON answer table for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Append every answer to this replay store.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Model name; part of the replay key.
    #[arg(long)]
    model: Option<String>,
    /// Sampling temperature; part of the replay key.
    #[arg(long)]
    temperature: Option<f64>,
    /// Chat-completions URL for the http backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Free-form label recorded with the run.
    #[arg(long)]
    seed_label: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// The ported tree.
    #[command(flatten)]
    inputs: InputArgs,
    /// Ground truth (JSON lines).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// The unported inputs, for the caller-update count.
    #[arg(long, num_args = 1..)]
    original: Vec<PathBuf>,
    /// Write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Graph(a) => commands::graph(a),
        Command::Port(a) => commands::port(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
