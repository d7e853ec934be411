use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Plan small-cell sites and massive-MIMO macro upgrades.
#[derive(Debug, Parser)]
#[command(name = "cellplan", version)]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random instance and write it as JSON.
    Generate(GenerateArgs),
    /// Run the Lagrangian/tabu solver and write a run directory.
    Solve(SolveArgs),
    /// Check a solution against every constraint of an instance.
    Verify(VerifyArgs),
    /// Enumerate every deployment of a tiny instance.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 2 km x 2 km area, four macro sites, 120 candidate sites, 700 users.
    Table1,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "table1")]
    pub preset: Preset,

    /// Generator config (JSON, or TOML by `.toml` extension) applied on top
    /// of the preset; missing fields keep the preset value.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub users: Option<usize>,

    #[arg(long)]
    pub small_sites: Option<usize>,

    /// Put candidate sites on a regular grid instead of drawing them.
    #[arg(long)]
    pub grid_layout: bool,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Instance file; `-` writes to stdout.
    #[arg(long, short, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file; `-` reads stdin.
    #[arg(default_value = "-")]
    pub instance: String,

    /// Solver parameters (JSON or TOML); missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Keep macros conventional and search small cells only.
    #[arg(long)]
    pub single_level: bool,

    #[arg(long)]
    pub max_iterations: Option<usize>,

    /// Run directory for results and traces.
    #[arg(long, env = "CELLPLAN_OUT_DIR", default_value = "cellplan-run")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,

    /// Solution JSON: a solve or oracle result, or a bare
    /// `{deployment, assignment, objective}` object.
    pub solution: PathBuf,

    /// Also require every user to be served.
    #[arg(long)]
    pub strict: bool,

    /// Report file; `-` writes to stdout.
    #[arg(long, short, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub instance: PathBuf,

    #[arg(long)]
    pub max_deployments: Option<u64>,

    #[arg(long)]
    pub max_users: Option<usize>,

    /// Also solve the instance and check that L <= optimum <= U.
    #[arg(long)]
    pub compare: bool,

    /// Solver parameters for `--compare`.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Seed for `--compare`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Result file; `-` writes to stdout.
    #[arg(long, short, default_value = "-")]
    pub out: String,
}
