//! `soliton-lab`: build soliton profiles, verify them, solve mode equations and
//! the radial Monge-Ampère continuity path, and evaluate the weighted energies.
//!
//! Exit codes: 0 pass, 1 configuration error, 2 solver failure, 3 verification failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "soliton-lab", version, about = "Steady Kähler-Ricci soliton profiles and the radial Monge-Ampère path")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "SOLITON_LAB_OUT", default_value = "soliton-lab-out")]
    out: PathBuf,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ProfileArgs {
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub n: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = 200.0, allow_negative_numbers = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = 4096)]
    pub count: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub link_volume: f64,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    /// Profile CSV written by `profile`; built inline when absent.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub n: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = 1e4, allow_negative_numbers = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = 16384)]
    pub count: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub link_volume: f64,
}

#[derive(Debug, Args, Clone)]
pub struct ModesArgs {
    /// Cone JSON `{n, a, link_spectrum, link_volume}`.
    #[arg(long)]
    pub spec: PathBuf,
    /// Batch JSON `[{lambda, beta, Q, tol?, envelope?, tmax?, count?}]`.
    #[arg(long)]
    pub batch: PathBuf,
    /// Default tolerance for modes without their own.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args, Clone)]
pub struct PoincareArgs {
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub n: i64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = -8.0, allow_negative_numbers = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    pub tmax: f64,
    #[arg(long, default_value_t = 512)]
    pub count: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
}

#[derive(Debug, Args, Clone)]
pub struct ProblemArgs {
    /// Problem JSON `{n, a, grid, F, steps, tol}`; the reference bump when absent.
    #[arg(long)]
    pub problem: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a profile; writes profile.csv and profile_report.json.
    Profile(ProfileArgs),
    /// Check asymptotics, curvature, charge, volume growth and frame decay.
    Verify(VerifyArgs),
    /// Solve a batch of link-mode equations.
    Modes(ModesArgs),
    /// Spectral gap of radial functions and the subsolution certificate.
    Poincare(PoincareArgs),
    /// Run the Monge-Ampère continuity path.
    SolveMa(ProblemArgs),
    /// Weighted energies of the continuity-path solution.
    Energies(ProblemArgs),
    /// Run every stage and write one summary.
    Report(ProblemArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let out = OutDir::new(cli.out);
    pool.install(|| match cli.command {
        Command::Profile(args) => commands::profile(&args, &out),
        Command::Verify(args) => commands::verify(&args, &out),
        Command::Modes(args) => commands::modes(&args, &out),
        Command::Poincare(args) => commands::poincare(&args, &out),
        Command::SolveMa(args) => commands::solve_ma(&args, &out),
        Command::Energies(args) => commands::energies(&args, &out),
        Command::Report(args) => commands::report(&args, &out),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
