use std::process::ExitCode;

use clap::Parser;
use rhawkes_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rhawkes: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
