//! `nhspec` command-line front end.

mod commands;
mod config;
mod error;
mod model;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Command;
use config::{Emit, Overrides, RunConfig};
use error::CliError;
use model::ModelFile;

#[derive(Parser)]
#[command(name = "nhspec", version, about = "Spectral analysis of non-Hermitian and open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Continue eigenvalues along one parameter and report events.
    Sweep(Common),
    /// Locate an exceptional point in a two-parameter plane.
    Locate(Common),
    /// Transport eigenpairs around a closed loop.
    Encircle(Common),
    /// Resonance trapping in the toy model H0 - i alpha V V^T.
    Trap(Common),
    /// S-matrix lineshapes, phases and BIC signatures.
    Scatter(Common),
    /// Self-consistent resonances of the effective Hamiltonian.
    Heff(Common),
}

#[derive(Args)]
struct Common {
    /// Model file (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, default_value = "csv,json")]
    emit: String,
    #[arg(long)]
    workers: Option<usize>,
    /// EP gap tolerance relative to the spectral scale.
    #[arg(long)]
    tol_ep: Option<f64>,
    /// Continuum grid size for principal-value integrals (odd).
    #[arg(long)]
    pv_grid: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    seed_p1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    seed_p2: Option<f64>,
}

fn execute(cmd: Command, c: Common) -> Result<(), CliError> {
    let emit = Emit::parse(&c.emit)?;
    let mut file = ModelFile::load(&c.model)?;
    let o = Overrides {
        workers: c.workers,
        tol_ep: c.tol_ep,
        pv_grid: c.pv_grid,
        seed_p1: c.seed_p1,
        seed_p2: c.seed_p2,
    };
    let cfg = RunConfig::new(c.out, emit, &file.config, &o)?;
    if let Some(m) = c.pv_grid {
        file.config.pv_grid = Some(m);
    }
    commands::run(cmd, &file, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, common) = match cli.command {
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Locate(c) => (Command::Locate, c),
        Cmd::Encircle(c) => (Command::Encircle, c),
        Cmd::Trap(c) => (Command::Trap, c),
        Cmd::Scatter(c) => (Command::Scatter, c),
        Cmd::Heff(c) => (Command::Heff, c),
    };
    std::panic::set_hook(Box::new(|_| {}));
    let result = std::panic::catch_unwind(|| execute(cmd, common)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "internal error".into());
        Err(CliError::Numerical(format!("internal error: {msg}")))
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nhspec {}: {e}", cmd.name());
            ExitCode::from(e.exit_code())
        }
    }
}
