mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Outcome, EXIT_ERROR, EXIT_OK};
use config::{ExperimentConfig, Flags};

/// Weak-error experiments for path-dependent SDEs with Hölder memory.
#[derive(Debug, Parser)]
#[command(name = "pathsde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate E f(X(T)) with one scheme at M steps per tau
    Simulate(Flags),
    /// Weak-error table over stepsize levels with a fitted order
    Converge(Flags),
    /// Compare an importance-sampled estimate with direct simulation
    GirsanovCheck(Flags),
    /// Run a diagnostic check selected by --check
    Diagnose(Flags),
    /// Print the model catalog as JSON
    Catalog,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let (flags, f): (Flags, fn(&ExperimentConfig) -> anyhow::Result<Outcome>) = match cli.command {
        Command::Catalog => return Ok(commands::catalog()),
        Command::Simulate(f) => (f, commands::simulate),
        Command::Converge(f) => (f, commands::converge),
        Command::GirsanovCheck(f) => (f, commands::girsanov_check),
        Command::Diagnose(f) => (f, commands::diagnose),
    };
    let cfg = ExperimentConfig::resolve(&flags)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            anyhow::bail!("--threads: need at least one thread");
        }
    }
    let outcome = f(&cfg)?;
    if let Some(dir) = &cfg.out {
        commands::write_outputs(dir, &outcome)?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let written = serde_json::to_writer_pretty(&mut out, &outcome.report)
                .map_err(std::io::Error::from)
                .and_then(|()| writeln!(out));
            match written {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_ERROR)
                }
                _ => ExitCode::from(outcome.exit),
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
