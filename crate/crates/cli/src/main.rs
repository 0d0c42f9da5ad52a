use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covdyn_cli::run::{run, Mode, RunError, RunOptions};
use covdyn_cli::scenario::parse_scenario;

/// Covariant continuum dynamics of bodies in Riemannian space.
#[derive(Debug, Parser)]
#[command(name = "covdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the equations of motion from the initial data
    Simulate(Common),
    /// Newton iteration towards a loaded equilibrium
    Equilibrium(Common),
    /// Dump the linearization coefficients and compare with finite differences
    Linearize(Common),
    /// Run the acceptance checks; without a scenario, the full suite
    Verify(VerifyArgs),
    /// Trace a geodesic of the space manifold
    Geodesic(Common),
}

#[derive(Debug, Args)]
struct Shared {
    /// Directory for field dumps and the report
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for random test fields
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Number of ε levels in finite-difference sweeps
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..=12))]
    eps_sweep: u64,

    /// Enforce convergence slopes as well as defect magnitudes
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file, TOML or JSON
    #[arg(long)]
    scenario: PathBuf,

    #[command(flatten)]
    shared: Shared,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Scenario file, TOML or JSON
    #[arg(long)]
    scenario: Option<PathBuf>,

    #[command(flatten)]
    shared: Shared,
}

const EXIT_DEFECT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, path, shared) = match cli.command {
        Command::Simulate(c) => (Mode::Simulate, Some(c.scenario), c.shared),
        Command::Equilibrium(c) => (Mode::Equilibrium, Some(c.scenario), c.shared),
        Command::Linearize(c) => (Mode::Linearize, Some(c.scenario), c.shared),
        Command::Geodesic(c) => (Mode::Geodesic, Some(c.scenario), c.shared),
        Command::Verify(v) => (Mode::Verify, v.scenario, v.shared),
    };
    let scenario = match path.as_deref().map(parse_scenario).transpose() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let options = RunOptions {
        out: shared.out,
        seed: shared.seed,
        eps_sweep: shared.eps_sweep as usize,
        strict: shared.strict,
    };
    match run(scenario.as_ref(), mode, &options) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_DEFECT)
            }
        }
        Err(e @ RunError::Scenario(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
