//! Command-line front end for the driftbound toolkit: certified rates and
//! mixing-time bounds from drift data, exact finite-chain validation,
//! strong-random-time simulation, and the pump-model reproduction.

mod commands;
mod emit;

use clap::Parser;
use commands::{BoundArgs, OracleArgs, PumpCmd, RateArgs, SimulateArgs};
use driftbound::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "driftbound",
    version,
    about = "Certified Markov chain convergence bounds from drift and minorization data"
)]
struct Cli {
    /// Emit machine-readable JSON instead of plain text.
    #[arg(long, global = true)]
    json: bool,

    /// Print floats at full precision (default: 6 significant digits).
    #[arg(long = "full-precision", global = true)]
    full_precision: bool,

    /// TOML file supplying defaults for any flag; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for generated files (overrides $DRIFTBOUND_OUT_DIR).
    #[arg(long = "out-dir", global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Subcommand)]
enum Command {
    /// Certified geometric rate (B, rho, r) from drift data (lambda, K, m, eps).
    Rate(RateArgs),
    /// Mixing-time certificates tau_TV, tau_V plus the bound curves as CSV.
    Bound(BoundArgs),
    /// Exact finite-chain validation checks and the TV-rate scaling experiment.
    Oracle(OracleArgs),
    /// Monte Carlo strong-random-time tails against the certified bound.
    Simulate(SimulateArgs),
    /// The hierarchical pump-model pipeline.
    Pump {
        #[command(subcommand)]
        cmd: PumpCmd,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // --help and --version exit 0; any usage problem is a
            // validation failure under the exit-code contract.
            let ok = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let root: Option<toml::Table> = match &cli.config {
        None => None,
        Some(p) => Some(
            toml::from_str(&std::fs::read_to_string(p)?)
                .map_err(|e| Error::Parse(format!("config file {}: {e}", p.display())))?,
        ),
    };
    let root = root.as_ref();
    let style = emit::Style {
        json: cli.json || commands::cfg_bool(root, "json")?,
        full: cli.full_precision || commands::cfg_bool(root, "full-precision")?,
    };
    let out_dir = match cli.out_dir {
        Some(d) => Some(d),
        None => commands::cfg_path(root, "out-dir")?,
    };
    let out_dir = out_dir.as_deref();
    let section = |name: &str| root.and_then(|t| t.get(name)).and_then(|v| v.as_table());

    match cli.command {
        Command::Rate(a) => commands::run_rate(a, section("rate"), style),
        Command::Bound(a) => commands::run_bound(a, section("bound"), style, out_dir),
        Command::Oracle(a) => commands::run_oracle(a, section("oracle"), style, out_dir),
        Command::Simulate(a) => commands::run_simulate(a, section("simulate"), style, out_dir),
        Command::Pump { cmd: PumpCmd::Reproduce(a) } => {
            let sect = section("pump")
                .and_then(|t| t.get("reproduce"))
                .and_then(|v| v.as_table());
            commands::run_reproduce(a, sect, style, out_dir)
        }
    }
}
