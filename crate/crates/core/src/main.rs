//! Binary entry point for the experiment runner.

use std::process::ExitCode;

fn main() -> ExitCode {
    vemlap::cli::run()
}
