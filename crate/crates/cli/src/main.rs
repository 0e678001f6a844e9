use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = memk_cli::Cli::parse();
    match memk_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", memk_cli::error_json(&e));
            ExitCode::FAILURE
        }
    }
}
