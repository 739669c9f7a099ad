use std::process::ExitCode;

use clap::Parser;
use cohsmix_cli::cli::{run, Cli};
use cohsmix_cli::HarnessError;

fn fail(err: &HarnessError) -> ExitCode {
    let message = err.to_string().replace('\n', " ");
    eprintln!("error: kind={} message={message}", err.kind());
    ExitCode::FAILURE
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(value) = std::env::var("COHSMIX_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| HarnessError::Usage(format!("COHSMIX_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&HarnessError::Usage(e.kind().to_string() + ": " + &e.to_string())),
    };
    if let Err(e) = configure_threads().and_then(|()| run(&cli)) {
        return fail(&e);
    }
    ExitCode::SUCCESS
}
