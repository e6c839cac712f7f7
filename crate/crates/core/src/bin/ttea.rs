//! Thin command-line front end; all work happens in `ttea::cli`.

use std::process::ExitCode;

use clap::Parser;
use ttea::cli::{self, Cli, Command};

fn run(cli: Cli) -> ttea::Result<u8> {
    match cli.command {
        Command::GenSynth(a) => print!("{}", cli::cmd_gen_synth(&a)?.to_text()),
        Command::Train(a) => print!("{}", cli::cmd_train(&a)?.to_text()),
        Command::Eval(a) => print!("{}", cli::cmd_eval(&a)?.to_text()),
        Command::Ablate(a) => {
            let table = cli::cmd_ablate(&a)?;
            print!("{}", table.to_tsv());
            if table.failures() > 0 {
                eprintln!("{} grid cell(s) failed", table.failures());
            }
        }
        Command::Check(a) => {
            let report = cli::cmd_check(&a)?;
            print!("{}", report.to_text());
            let failed = report.failures().count();
            println!("{} checks, {failed} failed", report.checks.len());
            if failed > 0 {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
