use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ihgp::commands;
use ihgp::config::Method;
use ihgp::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "ihgp", version, about = "State-space Gaussian process inference for long time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior marginals for a `t,y` series.
    Infer {
        #[arg(long)]
        data: PathBuf,
        /// Overrides the method in the config.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Batch hyperparameter optimization (Gaussian likelihood).
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Rolling-window hyperparameter learning over a stream.
    Online {
        #[arg(long)]
        data: PathBuf,
    },
    /// Intensity of an event stream (single `t` column).
    Lgcp {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Runtime scaling in the state dimension.
    Bench,
    /// Write the configured synthetic data set to `data.csv`.
    Gen,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Ihgp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Ihgp => Method::Ihgp,
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Err(CliError::Config("--config is required".into())),
    }
}

#[cfg(feature = "parallel")]
fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("IHGP_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("IHGP_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> CliResult<()> {
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let cfg = load_config(cli.config.as_deref())?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Infer { data, method } => {
            let method = method.map_or(cfg.method, Method::from);
            commands::cmd_infer(&cfg, &data, out, method).map(drop)
        }
        Command::Fit { data } => commands::cmd_fit(&cfg, &data, out).map(drop),
        Command::Online { data } => commands::cmd_online(&cfg, &data, out).map(drop),
        Command::Lgcp { data, method } => {
            let method = method.map_or(cfg.method, Method::from);
            commands::cmd_lgcp(&cfg, &data, out, method).map(drop)
        }
        Command::Bench => commands::cmd_bench(&cfg, out).map(drop),
        Command::Gen => commands::cmd_gen(&cfg, out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
