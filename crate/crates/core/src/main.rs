use std::process::ExitCode;

use clap::Parser;
use fv0::cli_io::{run, Cli, Outcome};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Unconverged) => {
            eprintln!("fv0: some states did not converge (marked converged = false)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("fv0: {e}");
            ExitCode::from(1)
        }
    }
}
