use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = se2fm_cli::Cli::parse();
    if se2fm_cli::run(cli) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
