use std::process::ExitCode;

use clap::Parser;
use cosym_cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
