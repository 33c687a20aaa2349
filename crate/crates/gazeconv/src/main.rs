use std::process::ExitCode;

use clap::Parser;
use gazeconv::cli::Cli;

fn main() -> ExitCode {
    match gazeconv::commands::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gazeconv: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
