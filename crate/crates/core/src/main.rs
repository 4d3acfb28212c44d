use std::process::ExitCode;

use clap::Parser;
use mcpinn::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mcpinn: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
