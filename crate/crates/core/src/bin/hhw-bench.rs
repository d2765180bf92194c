use std::process::ExitCode;

use clap::Parser;
use hhw::harness::{run_experiment, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = match run_experiment(&args) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("hhw-bench: {e}");
            return ExitCode::FAILURE;
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.csv) {
                eprintln!("hhw-bench: cannot write {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
        None => print!("{}", outcome.csv),
    }
    println!("{}", outcome.summary);
    ExitCode::SUCCESS
}
