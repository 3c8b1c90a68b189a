mod args;
mod commands;
mod error;
mod input;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let rendered = commands::run(&cli.command)?;
    match &cli.command.output().out {
        Some(path) => std::fs::write(path, &rendered.bytes)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?,
        None => std::io::stdout()
            .write_all(&rendered.bytes)
            .map_err(|e| CliError::Output(e.to_string()))?,
    }
    match rendered.status {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
