use std::process::ExitCode;

use clap::Parser;

use kerr_gates_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kerr-gates: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
