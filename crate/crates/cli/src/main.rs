mod args;
mod commands;
mod config;
mod dataset;
mod errors;
mod output;

use clap::Parser;

use args::{Cli, Command};
use errors::CliError;

/// `NESTED_KRIG_THREADS` caps worker parallelism; 0 or unset lets the pool
/// size itself.
fn init_threads() -> Result<(), CliError> {
    match std::env::var("NESTED_KRIG_THREADS") {
        Ok(value) => {
            let threads: usize = value.trim().parse().map_err(|_| {
                CliError::validation(format!(
                    "NESTED_KRIG_THREADS must be a nonnegative integer, got '{value}'"
                ))
            })?;
            if threads > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global()
                    .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
            }
            Ok(())
        }
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(e) => Err(CliError::validation(format!("NESTED_KRIG_THREADS: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match &cli.command {
        Command::Predict(args) => commands::predict(args),
        Command::Sample(args) => commands::sample(args),
        Command::DemoFigure1(args) => commands::demo_figure1(args),
        Command::CovarianceReport(args) => commands::covariance_report(args),
        Command::BoundsReport(args) => commands::bounds_report(args),
        Command::Consistency(args) => commands::consistency(args),
        Command::Nonconsistency(args) => commands::nonconsistency(args),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("{err}");
            std::process::exit(err.exit_code);
        }
    }
}
