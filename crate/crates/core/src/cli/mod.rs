//! The `primcodec` command-line front end.
//!
//! Every command writes its outputs plus a `manifest.json` into `--out`.
//! Failures print a single line `error[<class>]: <message>` on stderr and
//! exit with 2 (usage or config), 3 (numeric) or 4 (I/O).

mod commands;
mod manifest;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, ErrorClass, Result};
use crate::training::InitMode;

pub use manifest::{git_blob_hash, RunManifest, MANIFEST_FILE};

pub const THREADS_ENV: &str = "PRIMCODEC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "primcodec", version, about = "Latent codes for robot motion primitives")]
pub struct Cli {
    /// Worker threads; falls back to PRIMCODEC_THREADS, then all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic motion dataset.
    Gen(GenArgs),
    /// Monte-Carlo statistics of projected inner products.
    ProjectStats(ProjectStatsArgs),
    /// Train the decoder and training-part latents.
    Train(TrainArgs),
    /// Fit latents of the held-out part with a frozen decoder.
    Eval(EvalArgs),
    /// Affine subspace clustering of latent codes.
    Cluster(ClusterArgs),
    /// Intra-primitive experiment.
    Intra(ExperimentArgs),
    /// Inter-primitive experiment.
    Inter(ExperimentArgs),
    /// Merge experiment directories into one summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ProjectStatsArgs {
    /// Source dimension.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use b = e₂ instead of b = a = e₁.
    #[arg(long)]
    pub orthogonal: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training config JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<InitMode>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Latent initialization for the evaluation samples.
    #[arg(long)]
    pub mode: Option<InitMode>,
    /// Defaults to the checkpoint directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// JSON rows (`[[...], ...]` or `{"latent": [...], "labels": [...]}`)
    /// or a binary latent file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Lift codes to homogeneous coordinates.
    #[arg(long)]
    pub affine: bool,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    pub tau: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground-truth labels as a JSON array.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<InitMode>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment output directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code of a failure class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Numeric => 3,
        ErrorClass::Io => 4,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a thread count"))),
        _ => Ok(None),
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let Some(n) = thread_count(flag)? else {
        return Ok(());
    };
    if n == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    // A second call in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Gen(a) => commands::gen(&a, argv),
        Command::ProjectStats(a) => commands::project_stats(&a, argv),
        Command::Train(a) => commands::train(&a, argv),
        Command::Eval(a) => commands::eval(&a, argv),
        Command::Cluster(a) => commands::cluster(&a, argv),
        Command::Intra(a) => commands::intra(&a, argv),
        Command::Inter(a) => commands::inter(&a, argv),
        Command::Report(a) => report::report(&a, argv),
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.kind().to_string();
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or(&msg).trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return 2;
        }
    };
    match run(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            let class = e.class();
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(": ");
                    msg.push_str(&s.to_string());
                }
                src = s.source();
            }
            eprintln!("error[{}]: {}", class.as_str(), one_line(&msg));
            exit_code(class)
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
