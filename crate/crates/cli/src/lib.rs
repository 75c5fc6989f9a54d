//! Command-line front end: CSV ingestion, prior configuration, and the
//! `test`, `summarize`, `simulate`, `bench` and `sweep` commands.

pub mod commands;
pub mod error;
pub mod input;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dmmt::{PriorSpec, ScenarioId};

pub use error::{CliError, CliResult};

pub const RESULT_SCHEMA: &str = "dmmt-result/1";
pub const SUMMARY_SCHEMA: &str = "dmmt-summary/1";

#[derive(Debug, Parser)]
#[command(name = "dmmt", version, about = "Bayesian two-sample comparison with divide-merge Markov trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior probability that the two samples share one distribution.
    Test(DataCmd),
    /// Representative tree and the table of differential regions.
    Summarize(DataCmd),
    /// Replicated simulation with permuted-label nulls and ROC summary.
    Simulate(SimulateCmd),
    /// Fit-time scaling against sample size.
    Bench(BenchCmd),
    /// Prior sensitivity over a (beta, gamma) grid.
    Sweep(SweepCmd),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// CSV file for the first group.
    #[arg(long, requires = "input_b", conflicts_with_all = ["input", "group_col"])]
    pub input_a: Option<PathBuf>,
    /// CSV file for the second group.
    #[arg(long, requires = "input_a")]
    pub input_b: Option<PathBuf>,
    /// Single CSV file holding both groups.
    #[arg(long, requires = "group_col")]
    pub input: Option<PathBuf>,
    /// Column of `--input` naming each row's group.
    #[arg(long, requires = "input")]
    pub group_col: Option<String>,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Prior config file with key=value lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub depth_cap: Option<usize>,
    #[arg(long)]
    pub delta_star: Option<f64>,
}

impl PriorArgs {
    /// Config file values, then flag overrides.
    pub fn resolve(&self) -> CliResult<PriorSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                PriorSpec::from_config_str(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => PriorSpec::default(),
        };
        if let Some(v) = self.beta {
            spec.beta = v;
        }
        if let Some(v) = self.gamma {
            spec.gamma = v;
        }
        if let Some(v) = self.depth_cap {
            spec.depth_cap = v;
        }
        if let Some(v) = self.delta_star {
            spec.delta_star = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct DataCmd {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every evaluated node as JSON lines to this file.
    #[arg(long)]
    pub dump_memo: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: ScenarioId,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the first replicate's raw samples as group_a.csv / group_b.csv.
    #[arg(long)]
    pub emit_data: bool,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    #[arg(long, value_parser = parse_scenario, default_value = "1d-local-shift")]
    pub scenario: ScenarioId,
    /// Per-group sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "200,400,800,1600")]
    pub sizes: Vec<usize>,
    /// Datasets per size.
    #[arg(long, default_value_t = 15)]
    pub replicates: usize,
    /// Repeated fits per dataset inside one timing.
    #[arg(long, default_value_t = 5)]
    pub inner: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    #[arg(long, value_parser = parse_scenario, default_value = "1d-local-shift")]
    pub scenario: ScenarioId,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4")]
    pub betas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.4")]
    pub gammas: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    s.parse().map_err(|_| {
        let known: Vec<&str> = ScenarioId::ALL.iter().map(|id| id.as_str()).collect();
        format!("unknown scenario {s:?}; expected one of {}", known.join(", "))
    })
}

/// Cap the worker pool from `DMMT_THREADS`, if set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("DMMT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("DMMT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure thread pool: {e}")))
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Test(c) => commands::test(&c),
        Command::Summarize(c) => commands::summarize(&c),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Bench(c) => commands::bench(&c),
        Command::Sweep(c) => commands::sweep(&c),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dmmt: {e}");
            e.exit_code()
        }
    }
}
