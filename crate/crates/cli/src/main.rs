//! `lrl`: spectra, radial solvers, eigenfunctions and verification suites for spin-s
//! Hamiltonians with a generalized Laplace-Runge-Lenz vector.
//!
//! Spin is always given as `twice_s` (`--spin 3` means s = 3/2).
//!
//! Exit codes: 0 ok, 1 a verification check failed, 2 invalid configuration,
//! 3 not derived in paper (uncovered spin or construction), 4 empty spectrum (the empty
//! table is still printed).

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::{parse_j, Format, RunConfig, SchemeArg, Suite};
use lrl_core::{Error, SpinValue};

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_DERIVED: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotDerived(_) => EXIT_NOT_DERIVED,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// A fully rendered output and its exit code.
pub struct Report {
    pub text: String,
    pub code: i32,
}

#[derive(Parser)]
#[command(name = "lrl", version, about = "Spin-s Coulomb-like systems with a generalized LRL vector")]
struct Cli {
    /// Worker threads for internal sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Twice the spin: 0, 1, 2, 3, ...
    #[arg(long)]
    spin: u32,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct Channel {
    /// Total angular momentum, e.g. `2`, `1.5` or `3/2`.
    #[arg(long, value_parser = parse_j, conflicts_with_all = ["twice_j", "l"])]
    j: Option<f64>,
    /// Twice the total angular momentum.
    #[arg(long, conflicts_with = "l")]
    twice_j: Option<u32>,
    /// Orbital momentum; for spin 0 this is `j`.
    #[arg(long)]
    l: Option<u32>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 8000)]
    points: usize,
    /// Outer radius; by default `40 k²/(mα)` for the largest expected `k`.
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long, value_enum, default_value = "central")]
    scheme: SchemeArg,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form spectrum table.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Run a verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        channel: Channel,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Numeric bound states of one `j` channel.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        channel: Channel,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Radial eigenfunction of level `n` in one `j` channel, as a grid table.
    Eigenfunction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        channel: Channel,
        #[arg(long, default_value_t = 0)]
        n: u32,
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn channel_j(spin: u32, ch: &Channel) -> Result<Option<f64>, CliError> {
    if let Some(l) = ch.l {
        if spin != 0 {
            return Err(CliError::invalid("--l is only meaningful for spin 0; use --j"));
        }
        return Ok(Some(l as f64));
    }
    Ok(ch.j.or(ch.twice_j.map(|t| t as f64 / 2.0)))
}

fn base(common: &Common, default_format: Format) -> RunConfig {
    RunConfig {
        spin: SpinValue::new(common.spin),
        j: None,
        alpha: common.alpha,
        mass: common.mass,
        levels: 1,
        points: 8000,
        r_max: None,
        format: common.format.unwrap_or(default_format),
        seed: 1,
        suite: None,
        scheme: Default::default(),
        n: 0,
    }
}

fn run(cli: Cli) -> Result<Report, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::invalid("--threads must be at least 1"));
        }
        lrl_core::parallel::set_threads(t).map_err(CliError::invalid)?;
    }
    match cli.command {
        Command::Spectrum { common, levels } => {
            let cfg = RunConfig { levels, ..base(&common, Format::Json) }.validate()?;
            commands::cmd_spectrum(&cfg)
        }
        Command::Verify {
            common,
            suite,
            channel,
            seed,
        } => {
            let cfg = RunConfig {
                j: channel_j(common.spin, &channel)?,
                seed,
                suite: Some(suite),
                ..base(&common, Format::Json)
            }
            .validate()?;
            commands::cmd_verify(&cfg)
        }
        Command::Solve {
            common,
            channel,
            levels,
            grid,
        } => {
            let cfg = RunConfig {
                j: channel_j(common.spin, &channel)?,
                levels,
                points: grid.points,
                r_max: grid.r_max,
                scheme: grid.scheme.into(),
                ..base(&common, Format::Json)
            }
            .validate()?;
            commands::cmd_solve(&cfg)
        }
        Command::Eigenfunction {
            common,
            channel,
            n,
            grid,
        } => {
            let cfg = RunConfig {
                j: channel_j(common.spin, &channel)?,
                n,
                points: grid.points,
                r_max: grid.r_max,
                scheme: grid.scheme.into(),
                ..base(&common, Format::Csv)
            }
            .validate()?;
            commands::cmd_eigenfunction(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{}", report.text);
            ExitCode::from(report.code as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
