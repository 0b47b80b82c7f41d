use std::process::ExitCode;

use clap::Parser;

use gdntt::cli::{run_command, Cli, Outcome, RunConfig, EXIT_CONFIG, EXIT_MISMATCH};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let stdout = std::io::stdout();
        run_command(&cfg, &mut stdout.lock())
    });
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(EXIT_MISMATCH),
        Err(e) => {
            eprintln!("gdntt: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
