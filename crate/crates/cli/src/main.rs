use std::process::ExitCode;

use bfe_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bfe: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
