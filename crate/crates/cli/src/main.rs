use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use thermoshape_cli::{run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            return fail(&CliError::config(first));
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("{}: {}", out.command, out.output_dir.display());
            println!("{}", out.message.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_line());
    ExitCode::from(e.exit_code() as u8)
}
