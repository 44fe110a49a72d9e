//! `qkr-detector`: runs the qubit / kicked-rotator experiments from a JSON
//! config and writes CSV or JSON results.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::FitKind;
use crate::config::{Experiment, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "qkr-detector", version, about = "Qubit coupled to a quantum kicked rotator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides the config's `output`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Dispatch on the config's `experiment` key
    Run(RunArgs),
    /// Reduced qubit density matrix and ⟨p²⟩ per kick
    Evolve(RunArgs),
    /// Γ₁ and Γ₂ across a parameter range
    Sweep(RunArgs),
    /// Conditional Husimi distributions at one time
    Husimi(RunArgs),
    /// Box-integrated detector readout per kick
    Wd(RunArgs),
    /// Classical Lyapunov exponents for K, K+ε_c and K-ε_c
    Lyapunov(RunArgs),
    /// Phase-damping map against its continuous-time solution
    Channel(RunArgs),
    /// Overlap of the two conditional detector states
    Fidelity(RunArgs),
    /// Fit a decay rate to one column of a CSV
    Fit {
        #[arg(long, value_enum)]
        kind: FitKind,
        #[arg(long)]
        input: PathBuf,
        /// Column to fit; `abs_rho01` for exp, `rho11` for sine
        #[arg(long)]
        column: Option<String>,
        /// Angular frequency seed for the sine fit
        #[arg(long)]
        hint: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run_experiment(kind: Experiment, args: &RunArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    if let Some(declared) = cfg.experiment {
        if declared != kind {
            return Err(CliError::Config(format!(
                "config declares experiment `{}` but `{}` was requested",
                declared.name(),
                kind.name()
            )));
        }
    }
    if args.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let out = cfg.output_path(args.out.as_deref())?;
    log::info!("{} -> {}", kind.name(), out.display());
    match kind {
        Experiment::Evolve => commands::evolve_cmd(&cfg, &out),
        Experiment::Sweep => commands::sweep_cmd(&cfg, &out, args.threads),
        Experiment::Husimi => commands::husimi_cmd(&cfg, &out),
        Experiment::Wd => commands::wd_cmd(&cfg, &out),
        Experiment::Lyapunov => commands::lyapunov_cmd(&cfg, &out),
        Experiment::Channel => commands::channel_cmd(&cfg, &out),
        Experiment::Fidelity => commands::fidelity_cmd(&cfg, &out),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig::load(&args.config)?;
            let kind = cfg
                .experiment
                .ok_or_else(|| CliError::Config("`run` needs the `experiment` key".into()))?;
            run_experiment(kind, &args)
        }
        Command::Evolve(args) => run_experiment(Experiment::Evolve, &args),
        Command::Sweep(args) => run_experiment(Experiment::Sweep, &args),
        Command::Husimi(args) => run_experiment(Experiment::Husimi, &args),
        Command::Wd(args) => run_experiment(Experiment::Wd, &args),
        Command::Lyapunov(args) => run_experiment(Experiment::Lyapunov, &args),
        Command::Channel(args) => run_experiment(Experiment::Channel, &args),
        Command::Fidelity(args) => run_experiment(Experiment::Fidelity, &args),
        Command::Fit {
            kind,
            input,
            column,
            hint,
            out,
        } => commands::fit_cmd(&input, kind, column.as_deref(), hint, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
