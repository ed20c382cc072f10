use std::process::ExitCode;

use clap::Parser;
use droplab::cli::{Cli, Command, SEED_ENV};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut command = Cli::parse().command;
    if !matches!(command, Command::Replay(_)) {
        if let Ok(value) = std::env::var(SEED_ENV) {
            match value.trim().parse() {
                Ok(seed) => command.override_seed(seed),
                Err(_) => {
                    eprintln!("error: {SEED_ENV} must be an unsigned integer, got '{value}'");
                    return ExitCode::from(2);
                }
            }
        }
    }
    match command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
