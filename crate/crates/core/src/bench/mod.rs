//! Experiment harness and command-line entry point.

pub mod config;
pub mod experiments;
pub mod table;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Config, DetectorKind, ExperimentKind, Overrides};
pub use experiments::{
    run_experiment, run_gain_sweep, run_pd_vs_window, run_psd_demo, run_roc, run_seq_delay,
    run_tune,
};
pub use table::ResultTable;

use crate::{Error, Result};

/// Worker count from `SRSENSE_THREADS`; `None` means the rayon default.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("SRSENSE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a dedicated pool of `threads` workers (default size when
/// `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Parser)]
#[command(
    name = "srsense",
    version,
    about = "Seeded Monte Carlo experiments for SR pre-treated spectrum sensing",
    after_help = config::SCHEMA
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Input and output PSDs at a fixed noise intensity
    Psd(RunArgs),
    /// SNR gain across a grid of noise intensities
    Gainsweep(RunArgs),
    /// Search for the gain-maximizing noise intensity
    Tune(RunArgs),
    /// ROC curves of the plain, SR and dual block detectors
    Roc(RunArgs),
    /// Detection probability against sensing window length
    Pdwindow(RunArgs),
    /// False-alarm rate against detection delay, sequential detectors
    Seqdelay(RunArgs),
}

#[derive(Debug, Args)]
#[command(after_help = config::SCHEMA)]
struct RunArgs {
    /// TOML config file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trial count override
    #[arg(long)]
    trials: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::Psd(a) => (ExperimentKind::Psd, a),
            Command::Gainsweep(a) => (ExperimentKind::Gainsweep, a),
            Command::Tune(a) => (ExperimentKind::Tune, a),
            Command::Roc(a) => (ExperimentKind::Roc, a),
            Command::Pdwindow(a) => (ExperimentKind::Pdwindow, a),
            Command::Seqdelay(a) => (ExperimentKind::Seqdelay, a),
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidParameter { .. })
}

/// Parses `argv` (program name first), runs the experiment and writes its
/// CSV. Returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    let cfg = match &args.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default()),
    }
    .map(|c| {
        c.resolved(
            kind,
            Overrides {
                seed: args.seed,
                trials: args.trials,
            },
        )
    })
    .and_then(|c| c.validate(kind).map(|_| c));
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("srsense: {e}");
            return 1;
        }
    };

    let table = with_threads(threads_from_env(), || run_experiment(kind, &cfg)).and_then(|r| r);
    let table = match table {
        Ok(t) => t,
        Err(e) => {
            eprintln!("srsense: {e}");
            return if is_config_error(&e) { 1 } else { 2 };
        }
    };
    let written = match &args.out {
        Some(path) => std::fs::File::create(path)
            .and_then(|f| {
                let mut w = std::io::BufWriter::new(f);
                table.write_csv(&mut w)?;
                w.flush()
            })
            .map_err(|e| format!("{}: {e}", path.display())),
        None => table
            .write_csv(std::io::stdout().lock())
            .map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("srsense: {e}");
            2
        }
    }
}
