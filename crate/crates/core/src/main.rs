use std::process::ExitCode;

use clap::Parser;
use qndmetro::cli::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
