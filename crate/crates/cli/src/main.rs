mod config;
mod experiments;
mod report;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, ExperimentConfig};
use experiments::RunError;

const EXIT_VIOLATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_NUMERIC: u8 = 1;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run(args) = cli.command;
    let cfg = match ExperimentConfig::resolve(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(RunError::Certificate(m)) => {
            eprintln!("certificate violation: {m}");
            return ExitCode::from(EXIT_VIOLATION);
        }
        Err(RunError::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    match report::emit(&cfg, &outcome, args.out.as_deref()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {p}");
            }
        }
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    for c in outcome.certificates.iter().filter(|c| !c.holds) {
        eprintln!("certificate violated: {}", c.name);
    }
    if outcome.violated() {
        ExitCode::from(EXIT_VIOLATION)
    } else {
        ExitCode::SUCCESS
    }
}
