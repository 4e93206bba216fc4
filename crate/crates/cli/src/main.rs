//! `pmlab`: constants, regional solves, comparison checks, gluing and the
//! eps-sweep from the command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure, 4 verification failure, 1 anything else (I/O).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use commands::{Outcome, Q4Datum, Resolved};
use config::{RawConfig, UsageError};
use pmlab_core::solver::Region;

#[derive(Parser)]
#[command(name = "pmlab", version, about = "Forward-backward radial diffusion experiments")]
struct Cli {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Configuration keys as flags. Values are validated together with the file.
#[derive(Args)]
struct Overrides {
    /// Nonlinearity name (`log`).
    #[arg(long, global = true)]
    phi: Option<String>,
    /// Time of the pinch, or `auto` for the largest admissible value.
    #[arg(long, global = true)]
    t0: Option<String>,
    #[arg(long, global = true)]
    eps: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, global = true)]
    eps_ladder: Option<String>,
    /// Cells per region.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Largest time step, or `auto` for 2 t0 / n.
    #[arg(long, global = true)]
    dt_max: Option<String>,
    /// Initial-slope shape coefficients.
    #[arg(long, global = true, allow_hyphen_values = true)]
    c0: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c1: Option<String>,
    /// Interior strip width for the estimates, in (0, 1).
    #[arg(long, global = true)]
    delta: Option<String>,
    /// Q4 runs up to t_end_factor * t0.
    #[arg(long, global = true)]
    t_end_factor: Option<String>,
    /// Parent directory of the run directories.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived constants and the admissible t0 bounds.
    Constants,
    /// Solve one region and check its estimates.
    Solve {
        /// q1, t, q3 or q4.
        #[arg(long, value_parser = parse_region)]
        region: Region,
        /// Initial datum of a standalone q4 solve.
        #[arg(long, value_enum, default_value = "trace")]
        q4_datum: Q4Datum,
    },
    /// Interface lemma checks and the sub/supersolution catalog.
    Verify,
    /// Solve all regions, glue them and check the headline properties.
    Glue,
    /// Cauchy ladder in eps on interior compacts.
    Sweep,
}

fn parse_region(s: &str) -> Result<Region, String> {
    s.parse().map_err(|e: pmlab_core::Error| e.to_string())
}

impl Overrides {
    fn apply(&self, raw: &mut RawConfig) {
        raw.set("phi", self.phi.as_ref());
        raw.set("t0", self.t0.as_ref());
        raw.set("eps", self.eps.as_ref());
        raw.set("eps_ladder", self.eps_ladder.as_ref());
        raw.set("n", self.n.as_ref());
        raw.set("dt_max", self.dt_max.as_ref());
        raw.set("c0", self.c0.as_ref());
        raw.set("c1", self.c1.as_ref());
        raw.set("delta", self.delta.as_ref());
        raw.set("t_end_factor", self.t_end_factor.as_ref());
        raw.set("out", self.out.as_ref());
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::read(path)?,
        None => RawConfig::default(),
    };
    cli.overrides.apply(&mut raw);
    let res = Resolved::new(raw.validate()?)?;
    match &cli.command {
        Command::Constants => commands::constants(&res),
        Command::Solve { region, q4_datum } => commands::solve_region(&res, *region, *q4_datum),
        Command::Verify => commands::verify(&res),
        Command::Glue => commands::glue_all(&res),
        Command::Sweep => commands::sweep(&res),
    }
}

/// Maps an error to the exit-code contract.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<pmlab_core::Error>() {
        Some(core) if core.is_numerical() => 3,
        Some(
            pmlab_core::Error::Io { .. } | pmlab_core::Error::Csv(_) | pmlab_core::Error::Json(_),
        ) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            if let Some(dir) = &outcome.run_dir {
                println!("run directory: {}", dir.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                println!("verification failed");
                ExitCode::from(4)
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            if code == 2 {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(code)
        }
    }
}
