mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: Cli) -> error::CliResult<()> {
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Augment(a) => commands::augment(a),
        Command::Split(a) => commands::split(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Fuse(a) => commands::fuse_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Tune(a) => commands::tune_cmd(a),
        Command::Synth(a) => commands::synth(a),
        Command::ImportYolo(a) => commands::import_yolo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
