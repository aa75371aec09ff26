use std::process::ExitCode;

use clap::Parser;
use hrsf_core::cli::{execute, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("HRSF_LOG")).init();
    execute(Cli::parse()).into()
}
