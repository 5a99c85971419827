//! Command-line driver: reads a JSON run configuration, evaluates the
//! requested quantity and writes grids and tables to an output directory.

pub mod config;
pub mod error;

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Overrides;
use config::Format;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "qcarpet", version, about = "Quantum carpet simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probability density |Psi(x, t)|^2 on the configured grid.
    Carpet(Common),
    /// Velocity bundle inventory and per-bundle carpets.
    Bundles(Common),
    /// Degeneracy velocity of every intermode term.
    Velocities(Common),
    /// Constant-phase paths of selected intermode terms.
    Trajectories(Common),
    /// Fractional revival reconstruction at t = (p/q) T_R.
    Revival(Common),
    /// Classicized carpet with the classical path overlaid.
    Classicized(Common),
    /// Time-scale hierarchy T_cl, T_R, T_sr, ...
    Timescales(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Bundle speed, in units of v0 for the square well.
    #[arg(long)]
    v: Option<f64>,
    /// Revival fraction numerator.
    #[arg(long)]
    p: Option<u32>,
    /// Revival fraction denominator.
    #[arg(long)]
    q: Option<u32>,
    /// Restrict output to one grid format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for grid evaluation.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` and runs the command, printing to the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Like [`run`] but with explicit output streams. Returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let (common, action): (Common, fn(&mut commands::Context) -> CliResult<()>) = match cli.command {
        Command::Carpet(c) => (c, commands::carpet),
        Command::Bundles(c) => (c, commands::bundles),
        Command::Velocities(c) => (c, commands::velocities),
        Command::Trajectories(c) => (c, commands::trajectories),
        Command::Revival(c) => (c, commands::revival),
        Command::Classicized(c) => (c, commands::classicized),
        Command::Timescales(c) => (c, commands::timescales),
    };
    let config = config::load(&common.config)?;
    let overrides = Overrides { v: common.v, p: common.p, q: common.q, format: common.format, out: common.out };
    let mut ctx = commands::Context { config, overrides, out };
    match common.threads {
        None => action(&mut ctx),
        Some(0) => Err(CliError::config("--threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config("--threads", e.to_string()))?;
            pool.install(|| action(&mut ctx))
        }
    }
}
