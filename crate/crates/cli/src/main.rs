//! `qclone`: formulas, clone runs, HOM curves, experiment replication and
//! cloning cascades from the command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for runtime failures.
//! Errors go to stderr as a single `error[usage]:` or `error[runtime]:` line.

mod commands;
mod format;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QCLONE_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Runtime(_) => "runtime",
        }
    }
}

impl From<qudit_clone::Error> for CliError {
    fn from(e: qudit_clone::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qclone",
    version,
    about = "Optimal cloning of photonic qudits by bosonic symmetrization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal cloning and estimation fidelities.
    Formulas(FormulasArgs),
    /// Clone one input photon (1 -> 2) and print the clone state.
    Clone(CloneArgs),
    /// Coalescence enhancement R as a function of the photon delay (CSV `tau_fs,R`).
    Hom(HomArgs),
    /// Monte Carlo replication of the coincidence experiment.
    Experiment(ExperimentArgs),
    /// N -> M cloning by a cascade of symmetrization stages.
    Cascade(CascadeArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Print JSON with full precision instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct FormulasArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq, Eq)]
enum CloneMode {
    /// Closed-form clone state.
    Analytic,
    /// Fock-space simulation of the beam splitter.
    Oracle,
}

#[derive(Debug, Args)]
struct CloneArgs {
    /// `I:1`..`I:4`, `IV:1`..`IV:4`, or amplitudes like `1,0.5j,0,0`.
    #[arg(long, default_value = "I:1")]
    input: String,
    /// Dimension; raw amplitudes set it from their count.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value_t = CloneMode::Oracle)]
    mode: CloneMode,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct HomArgs {
    /// Signal photon state.
    #[arg(long, default_value = "I:4")]
    input: String,
    /// Ancilla photon state; the signal state when omitted.
    #[arg(long)]
    ancilla: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = -600.0, allow_hyphen_values = true)]
    tau_min: f64,
    #[arg(long, default_value_t = 600.0, allow_hyphen_values = true)]
    tau_max: f64,
    #[arg(long, default_value_t = 20.0)]
    tau_step: f64,
    /// Wavepacket overlap at zero delay.
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long, default_value_t = 795.0)]
    lambda_nm: f64,
    /// Spectral FWHM.
    #[arg(long, default_value_t = 4.5)]
    bandwidth_nm: f64,
    /// Also write `hom.csv` here.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// `I` or `IV`.
    #[arg(long, default_value = "I")]
    basis: String,
    /// JSON configuration; flags given explicitly override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coincidences recorded per input state.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Signal/ancilla wavepacket overlap.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    prep_fid: Option<f64>,
    #[arg(long)]
    analysis_fid: Option<f64>,
    /// Comma-separated randomization weights, e.g. `0.3,0.3,0.2,0.2`.
    #[arg(long)]
    ancilla_weights: Option<String>,
    /// Write `counts.csv` and `summary.json` here.
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct CascadeArgs {
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    d: usize,
    #[arg(long, default_value = "I:1")]
    input: String,
    /// Largest total photon number the cascade may reach.
    #[arg(long, default_value_t = qudit_clone::cloning::DEFAULT_PHOTON_CAP)]
    cap: usize,
    #[command(flatten)]
    out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let mut lines = rendered.lines().filter(|l| !l.trim().is_empty());
            let first = lines.next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            for l in lines {
                eprintln!("{l}");
            }
            return ExitCode::from(1);
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Formulas(a) => commands::formulas(&a, &mut stdout),
        Command::Clone(a) => commands::clone(&a, &mut stdout),
        Command::Hom(a) => commands::hom(&a, &mut stdout),
        Command::Experiment(a) => commands::experiment(&a, &mut stdout),
        Command::Cascade(a) => commands::cascade(&a, &mut stdout),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.tag());
            ExitCode::from(e.exit_code())
        }
    }
}
