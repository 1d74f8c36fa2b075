mod commands;
mod output;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dilation_core::numerics::montecarlo::DEFAULT_SEED;

use commands::RunContext;
use output::Format;
use sweep::{Sweep, Usage};

/// Instability timescales of superposed gravitational time dilations.
#[derive(Debug, Parser)]
#[command(name = "dilation", version, after_help = AFTER_HELP)]
struct Cli {
    /// Output format. Sweeps and pulse trains default to csv, everything
    /// else to table.
    #[arg(long, value_enum, global = true)]
    output: Option<Format>,

    /// Seed for every Monte Carlo estimate.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// TOML configuration for the subcommand (a file or, for `catalog`, a
    /// directory of entry files).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Sweep one parameter, e.g. `--sweep gain_db 0..220 steps 23`.
    #[arg(
        long,
        global = true,
        num_args = 4,
        allow_hyphen_values = true,
        value_names = ["NAME", "LO..HI", "steps", "K"]
    )]
    sweep: Option<Vec<String>>,

    #[command(subcommand)]
    command: Command,
}

const AFTER_HELP: &str = "Environment:\n  DILATION_QUAD_TOL  relative tolerance of the adaptive integrator (default 1e-6)";

#[derive(Debug, Subcommand)]
enum Command {
    /// Physical constants used throughout.
    Constants,
    /// Light clock pulse train, or its timescales with --summary.
    Lightclock {
        #[arg(long)]
        summary: bool,
    },
    /// Instability time of a probe near a superposed mass.
    Instability,
    /// Visibility, variance and instability time of the amplified interferometer.
    Interferometer,
    /// Ranks experiment entries by instability time.
    Catalog,
    /// Runs every oracle cross-check; exits 1 if any fails.
    Verify,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let sweep = cli.sweep.as_deref().map(Sweep::parse).transpose()?;
    let default_format = match (&cli.command, &sweep) {
        (_, Some(_)) | (Command::Lightclock { summary: false }, None) => Format::Csv,
        _ => Format::Table,
    };
    let format = cli.output.unwrap_or(default_format);
    let ctx = RunContext {
        seed: cli.seed,
        config: cli.config,
        sweep,
    };
    let table = match cli.command {
        Command::Constants => commands::constants(&ctx)?,
        Command::Lightclock { summary } => commands::lightclock(&ctx, summary)?,
        Command::Instability => commands::instability(&ctx)?,
        Command::Interferometer => commands::interferometer(&ctx)?,
        Command::Catalog => commands::catalog(&ctx)?,
        Command::Verify => {
            let (text, passed) = commands::verify(&ctx, format)?;
            emit(&text)?;
            return Ok(passed);
        }
    };
    emit(&table.render(format))?;
    Ok(true)
}

fn emit(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
