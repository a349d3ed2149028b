use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fraclimit_cli::{parse_config, run, CHECK_FAILED};

/// Kinetic simulations, nonlocal operator studies and limit solves driven
/// by a single config file.
#[derive(Parser, Debug)]
#[command(name = "fraclimit", version)]
struct Args {
    /// Run configuration (INI-style key = value with [sections]).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Override a config value, e.g. `--set model.s=0.6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_config(&args.config, &args.set).and_then(|cfg| run(&cfg, &args.out));
    match result {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            println!("manifest: {}", outcome.manifest.display());
            if outcome.checks_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(CHECK_FAILED as u8)
            }
        }
        Err(e) => {
            eprintln!("fraclimit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
