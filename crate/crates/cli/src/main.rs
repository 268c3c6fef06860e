//! `qexp`: search for quantum-optics setups, verify and simplify setup
//! files, compute Schmidt-rank vectors and grow polarization circuits.
//!
//! Exit codes: 0 success, 1 the objective does not hold, 2 usage or input
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "qexp", version, about = "Automated design of quantum-optics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a random (or exhaustive) setup search.
    Search(SearchArgs),
    /// Re-check a setup file, a solutions log or a state against an objective.
    Verify(VerifyArgs),
    /// Print the Schmidt-rank vector of a state or of a setup's heralded state.
    Srv(SrvArgs),
    /// Drop elements from a setup while the objective keeps holding.
    Simplify(SimplifyArgs),
    /// Grow a polarization circuit towards a target operator.
    Grow(GrowArgs),
    /// Draw a setup file as an ASCII diagram.
    Render(RenderArgs),
}

#[derive(Args, Debug, Default)]
pub struct SearchArgs {
    /// TOML config (or a previous run's manifest.json to replay it).
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Toolbox file or inline list such as "BS, LI, Dove(0|2)".
    #[arg(long)]
    pub toolbox: Option<String>,
    /// e.g. ghz:3, ghz:2+mavericks, srv:(3,3,2), scan, gate:2x3.
    #[arg(long)]
    pub objective: Option<String>,
    /// Base setup file (sources, detection, options).
    #[arg(long)]
    pub setup: Option<PathBuf>,
    /// Pump dimension of the default base setup.
    #[arg(long)]
    pub dim: Option<u32>,
    #[arg(long)]
    pub max_elements: Option<usize>,
    #[arg(long)]
    pub stop_after: Option<u64>,
    /// Print progress to stderr every N trials.
    #[arg(long)]
    pub progress: Option<u64>,
    /// Enumerate every setup up to max_elements instead of sampling.
    #[arg(long)]
    pub enumerate: bool,
    /// Register each new solution as a composite element.
    #[arg(long)]
    pub augment: bool,
    /// Force-evaluate pruned trials and count prune violations.
    #[arg(long)]
    pub audit: bool,
    #[arg(long)]
    pub no_simplify: bool,
    /// Record elapsed time in each solution (breaks byte-identical reruns).
    #[arg(long)]
    pub timestamps: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Default)]
pub struct OutArg {
    /// Output directory.
    #[arg(long, env = "QEXP_OUT_DIR", default_value = "qexp-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Setup file or solutions log (JSON lines).
    pub file: Option<PathBuf>,
    /// Objective; for a solutions log it defaults to the one in the sibling
    /// manifest.json.
    #[arg(long)]
    pub objective: Option<String>,
    /// Evaluate a state given as text instead of a file.
    #[arg(long, conflicts_with = "file")]
    pub state: Option<String>,
}

#[derive(Args, Debug)]
pub struct SrvArgs {
    /// State text, e.g. "|a:0 b:0 c:0⟩ + |a:1 b:1 c:1⟩".
    #[arg(required_unless_present = "setup")]
    pub state: Option<String>,
    /// Use the heralded state of this setup file.
    #[arg(long, conflicts_with = "state")]
    pub setup: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimplifyArgs {
    pub setup: PathBuf,
    #[arg(long)]
    pub objective: String,
    /// Write the simplified setup here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GrowArgs {
    /// Target matrix file: one row per line, entries like (0.5,-0.5).
    pub target: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub threshold: f64,
    #[arg(long, default_value_t = 5)]
    pub max_blocks: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 4000)]
    pub max_iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// joint or new-only.
    #[arg(long, default_value = "joint")]
    pub mode: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    pub setup: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(a) => commands::search(a),
        Command::Verify(a) => commands::verify(a),
        Command::Srv(a) => commands::srv(a),
        Command::Simplify(a) => commands::simplify(a),
        Command::Grow(a) => commands::grow(a),
        Command::Render(a) => commands::render(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qexp: {e}");
            ExitCode::from(e.code)
        }
    }
}
