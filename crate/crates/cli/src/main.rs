//! `ernm` command-line front end.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use error::{one_line, CliError};

#[derive(Debug, Parser)]
#[command(name = "ernm", version, about = "Fit, simulate and diagnose exponential-family random network models")]
struct Cli {
    /// Worker threads for chains and bootstrap replicates.
    #[arg(long, global = true, env = "ERNM_THREADS")]
    threads: Option<usize>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo maximum likelihood fit.
    Fit(FitArgs),
    /// Draw statistics (and optionally networks) from a model.
    Simulate(SimulateArgs),
    /// Goodness-of-fit envelopes for model and auxiliary statistics.
    Gof(GofArgs),
    /// Fit, then parametric-bootstrap standard errors.
    Bootstrap(BootstrapArgs),
    /// Long-run marginals with skewness and bimodality flags.
    Degeneracy(DegeneracyArgs),
    /// Exact distribution by enumerating every state (tiny networks only).
    Enumerate(EnumerateArgs),
    /// Write the synthetic school-like data set and its model.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Model file (TOML).
    #[arg(long)]
    pub model: PathBuf,
    /// Edge list with a `tail,head` header.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Attribute table with a `node,var,...` header.
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SamplerArgs {
    /// Steps discarded per chain [default: 10 n^2].
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Steps between retained draws [default: n^2].
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Probability of a dyad move [default: 0.8 with random attributes, else 1].
    #[arg(long)]
    pub p_dyad: Option<f64>,
    /// Probability that a dyad move deletes a random tie.
    #[arg(long, default_value_t = 0.5)]
    pub p_edge: f64,
    /// Proposal scale for continuous attributes.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

#[derive(Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct ParamArgs {
    /// Parameters as a CSV with `term` and `estimate` columns (e.g. a fit.csv).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Parameters inline, comma separated, in model order.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct StartArgs {
    /// Number of nodes when no edge list is given (starts from the empty graph).
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Draws per iteration.
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Largest per-coordinate step per iteration.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Converged once the largest step falls below this.
    #[arg(long, default_value_t = 1e-3)]
    pub conv_tol: f64,
    /// Converged once the moment-matching test has at least this p-value (1 disables).
    #[arg(long, default_value_t = 0.5)]
    pub conv_pvalue: f64,
    /// Draws for the final estimate and information [default: 5 m].
    #[arg(long)]
    pub final_m: Option<usize>,
    /// Starting parameters (CSV with `term` and `estimate` columns).
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    /// Also write every k-th simulated network under networks/.
    #[arg(long, default_value_t = 0)]
    pub keep_every: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct GofArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    pub sims: usize,
    /// Degree distributions are tabulated up to this value (last bin is open).
    #[arg(long, default_value_t = 10)]
    pub max_degree: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    /// Steps between simulated data sets [default: n^2].
    #[arg(long)]
    pub sim_thin: Option<u64>,
    /// Draws per iteration for each refit [default: m].
    #[arg(long)]
    pub refit_m: Option<usize>,
    /// Thinning for each refit [default: --thin].
    #[arg(long)]
    pub refit_thin: Option<u64>,
    /// Per-coordinate step bound for each refit [default: --epsilon].
    #[arg(long)]
    pub refit_epsilon: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DegeneracyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// A valley below this fraction of the smaller neighbouring peak splits modes.
    #[arg(long, default_value_t = 0.6)]
    pub valley_ratio: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub start: StartArgs,
    /// Parameters for the distribution table; omitted gives the uniform case.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<String>,
    /// Also compute the exact MLE of the network given with --edges.
    #[arg(long)]
    pub mle: bool,
    /// Refuse state spaces above 2^max_bits.
    #[arg(long, default_value_t = ernm::inference::DEFAULT_MAX_BITS)]
    pub max_bits: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 40)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub seed: u64,
    /// Sampler steps from the empty graph [default: 2000 n^2].
    #[arg(long)]
    pub steps: Option<u64>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    pool.build_global().map_err(|e| CliError::Other(e.to_string()))?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Gof(a) => commands::gof(&a),
        Command::Bootstrap(a) => commands::bootstrap(&a),
        Command::Degeneracy(a) => commands::degeneracy(&a),
        Command::Enumerate(a) => commands::enumerate(&a),
        Command::Synth(a) => commands::synth(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let first = e.to_string();
                let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
                eprintln!("error[usage]: {}", one_line(first));
                eprintln!("{e}");
            } else {
                let _ = e.print();
            }
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.category();
            eprintln!("error[{kind}]: {}", one_line(&e.to_string()));
            eprintln!("  note: {}", e.detail());
            ExitCode::from(code as u8)
        }
    }
}
