// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use sis_qsd::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sis-qsd: error: {e}");
            ExitCode::FAILURE
        }
    }
}
