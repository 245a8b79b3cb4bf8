mod args;
mod commands;
mod error;
mod output;
mod verify;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => verify::verify(a),
        Command::Decoy(a) => commands::decoy(a),
        Command::Ghz(a) => commands::ghz(a),
        Command::Constraints(a) => commands::constraints(a),
        Command::Optimize(a) => commands::optimize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("emguard: {e}");
            e.exit_code()
        }
    }
}
