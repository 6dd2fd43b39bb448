use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use covsense_cli::{execute, Cli, CliError, ConfigError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("covsense: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolve()?;
    let csv = execute(cli.command, &cfg)?;
    let written = if cfg.path == "-" {
        std::io::stdout().lock().write_all(csv.as_bytes())
    } else {
        std::fs::write(&cfg.path, csv)
    };
    written.map_err(|e| {
        CliError::Config(ConfigError {
            key: "path".into(),
            msg: format!("cannot write {}: {e}", cfg.path),
        })
    })
}
