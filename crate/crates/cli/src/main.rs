use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use qmonitor_cli::error::CliError;
use qmonitor_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Config(_)) {
                eprintln!("{}", Cli::command().render_usage());
            }
            e.exit_code()
        }
    }
}
