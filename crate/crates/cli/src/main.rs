use std::process::ExitCode;

use clap::Parser;

use oscihom_cli::{run, Cli, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("oscihom {}: error: {e}", std::env::args().nth(1).unwrap_or_default());
            ExitCode::from(EXIT_ERROR)
        }
    }
}
