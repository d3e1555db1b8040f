use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use gmi_cli::{error_envelope, exit_code, run, Command, Overrides, RunConfig};
use gmi_core::GmiError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Interpolate,
    OracleVerify,
    Minimax,
    Classify,
    Coeffs,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Interpolate => Command::Interpolate,
            Cmd::OracleVerify => Command::OracleVerify,
            Cmd::Minimax => Command::Minimax,
            Cmd::Classify => Command::Classify,
            Cmd::Coeffs => Command::Coeffs,
        }
    }
}

/// Interpolation of functionals of sequences with seasonal increments.
#[derive(Debug, Parser)]
#[command(name = "gmi", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output artifacts.
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Frequency grid size (power of two).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> Result<(), GmiError> {
    let Ok(v) = std::env::var("GMI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| GmiError::InvalidInput(format!("GMI_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| GmiError::InvalidInput(e.to_string()))
}

fn fail(err: &GmiError) -> ExitCode {
    eprintln!("{}", error_envelope(err));
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let overrides = Overrides { seed: args.seed, grid: args.grid };
    let command = Command::from(args.command);
    match run(command, cfg, &overrides, &args.output_dir) {
        Ok(outcome) => {
            if !args.quiet {
                println!("{}: {}", command.name(), outcome.summary);
                for f in &outcome.files {
                    println!("  wrote {}", f.display());
                }
            }
            match outcome.failure {
                Some(e) => fail(&e),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(&e),
    }
}
