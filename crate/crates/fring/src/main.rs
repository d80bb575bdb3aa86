use std::process::ExitCode;

use clap::Parser;
use fring::cli::Cli;
use fring::error::EXIT_VALIDATION;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    match fring::run(&cli) {
        Ok(summary) => {
            println!("{}", summary.headline);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
