use std::process::ExitCode;

use clap::Parser;
use qlab::Cli;

fn main() -> ExitCode {
    match qlab::execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qlab: {e}");
            e.into()
        }
    }
}
