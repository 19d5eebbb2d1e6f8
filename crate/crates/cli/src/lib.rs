//! Command-line front end for the `qlab-core` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod output;
pub mod verify;

pub use args::Cli;
pub use error::CliError;

use args::Command;

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compute(a) => commands::compute(&a),
        Command::Diagnose(a) => commands::diagnose(&a).map(drop),
        Command::Selfsim(a) => commands::selfsim(&a).map(drop),
        Command::Freq(a) => commands::freq(&a).map(drop),
        Command::Seeds(a) => commands::seeds(&a).map(drop),
        Command::Verify(a) => {
            let checks = verify::run_suite(a.skip_perf)?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            if failed > 0 {
                return Err(CliError::VerifyFailed { failed, total: checks.len() });
            }
            Ok(())
        }
    }
}
