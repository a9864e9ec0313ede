use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relay_ee::config::RawConfig;
use relay_ee::output::write_csv;
use relay_ee::studies::{run, run_pmf_dump, RunOptions};
use relay_ee::sweep::StudyKind;
use relay_ee::{CliError, VERSION};

#[derive(Parser)]
#[command(name = "relay-ee", version = VERSION, about = "Energy efficiency of relay-assisted cellular downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SINR distribution functions, analytic and simulated.
    Cdf(Common),
    /// Energy efficiency over the non-cooperative / cooperative UE density grid.
    Surface(Common),
    /// Energy efficiency versus relay offset scale, with the relay-free baseline.
    Threshold(Common),
    /// Load distributions of the per-cell and per-relay user counts.
    Pmf(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with flat `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set lambda_c=1e-3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_realizations: Option<usize>,
    #[arg(long, conflicts_with = "mc_only")]
    analytic_only: bool,
    #[arg(long)]
    mc_only: bool,
    /// Worker threads. Output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Write raw per-realization samples to this CSV.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (kind, c) = match cli.command {
        Command::Cdf(c) => (Some(StudyKind::Cdf), c),
        Command::Surface(c) => (Some(StudyKind::EeSurface), c),
        Command::Threshold(c) => (Some(StudyKind::Threshold), c),
        Command::Pmf(c) => (None, c),
    };
    let mut raw = match &c.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for s in &c.set {
        raw.apply_override(s)?;
    }
    if let Some(seed) = c.seed {
        raw.apply_override(&format!("seed={seed}"))?;
    }
    if let Some(n) = c.mc_realizations {
        raw.apply_override(&format!("mc_realizations={n}"))?;
    }
    if c.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let cfg = raw.resolve()?;
    let opts = RunOptions {
        skip_analytic: c.mc_only,
        skip_mc: c.analytic_only,
        workers: c.workers,
        dump_samples: c.dump_samples.clone(),
    };
    let out = match kind {
        Some(k) => run(k, &cfg, &opts)?,
        None => run_pmf_dump(&cfg)?,
    };
    match &c.out {
        Some(path) => write_csv(BufWriter::new(File::create(path)?), &out, &cfg)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&mut lock, &out, &cfg)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relay-ee: {e}");
            ExitCode::FAILURE
        }
    }
}
