use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use hetq::cli::{execute, Cli};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args_os()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    // Usage errors exit with status 2 and help/version with 0, per clap.
    let cli = Cli::try_parse_from(std::iter::once("hetq".to_string()).chain(args.iter().cloned()))
        .unwrap_or_else(|e| e.exit());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match execute(cli, &args, &mut out) {
        Ok(()) => {
            let _ = out.flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("hetq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
