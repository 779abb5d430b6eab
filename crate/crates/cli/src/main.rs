use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use nikodym_cli::{emit, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let (code, text) = nikodym_cli::run(&cli);
    match emit(&cli, &text) {
        Ok(()) => ExitCode::from(code),
        Err(e) => {
            eprintln!("cannot write report: {e}");
            ExitCode::from(3)
        }
    }
}
