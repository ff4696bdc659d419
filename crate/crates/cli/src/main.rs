use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use trustweave::{execute, Cli, EXIT_INPUT};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(run) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(run.report.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(EXIT_INPUT as u8);
            }
            if let (Some(path), Some(log)) = (&cli.log_out, &run.log) {
                if let Err(e) = std::fs::write(path, log) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(EXIT_INPUT as u8);
                }
            }
            ExitCode::from(run.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
