use std::process::ExitCode;

use clap::Parser;
use knnvault_cli::{run, Cli};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<knnvault::Error>())
                .map(knnvault::Error::code)
                .unwrap_or("ERROR");
            eprintln!("error [{code}]: {err:#}");
            ExitCode::FAILURE
        }
    }
}
