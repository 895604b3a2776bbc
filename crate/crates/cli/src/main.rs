//! `srpac`: frame-count planning and Monte-Carlo checks for multi-frame
//! super-resolution.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

fn main() -> ExitCode {
    let argv = match config::expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("srpac: error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &srpac_core::Error) -> ExitCode {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("srpac: error[{}]: {msg}", e.kind());
    match e {
        srpac_core::Error::Domain(_) | srpac_core::Error::Input(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}
