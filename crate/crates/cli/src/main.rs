//! `procval`: validity checks for process matrices stored as `.procmat.json`.
//!
//! Exit status is 0 when the checked property holds, 1 when it does not, and
//! 2 for usage or input errors.

mod args;
mod commands;
mod render;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Result of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

pub const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.command.json();
    let name = cli.command.name();
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&a, &mut stdout),
        Command::Product(a) => commands::product(&a, &mut stdout),
        Command::Decompose(a) => commands::decompose(&a, &mut stdout),
        Command::Oracle(a) => commands::oracle(&a, &mut stdout),
        Command::Reduce(a) => commands::reduce(&a, &mut stdout),
        Command::Gallery(a) => commands::gallery(&a, &mut stdout),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(err) => {
            if json {
                let body = serde_json::json!({
                    "command": name,
                    "error": format!("{err:#}"),
                    "exit_code": EXIT_USAGE,
                });
                let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&body).unwrap_or_default());
            }
            eprintln!("procval {name}: error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
