use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iiab_sim::{load_config, replay_file, run_experiment, Mode};

/// Exit status: 0 when nothing went wrong, 1 on a safety violation, an
/// engine abort or a missed liveness expectation, 2 on a usage, config or
/// replay error.
#[derive(Parser)]
#[command(name = "iiab", version, about = "IIAB model simulator and checker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run { config: PathBuf },
    /// Re-execute a trace or report and byte-compare it.
    Replay {
        artifact: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a config in exhaustive mode.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Run { config } => {
            let cfg = load_config(&config, None)?;
            report(run_experiment(&cfg)?)
        }
        Command::Check { config } => {
            let cfg = load_config(&config, Some(Mode::Exhaustive))?;
            report(run_experiment(&cfg)?)
        }
        Command::Replay { artifact, seed } => {
            let summary = replay_file(&artifact, seed)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            eprintln!("replay identical");
            Ok(true)
        }
    }
}

fn report(outcome: iiab_sim::Outcome) -> anyhow::Result<bool> {
    let mut brief = outcome.summary.clone();
    if let Some(o) = brief.as_object_mut() {
        o.remove("per_run");
    }
    println!("{}", serde_json::to_string_pretty(&brief)?);
    for p in &outcome.written {
        eprintln!("wrote {}", p.display());
    }
    Ok(outcome.ok)
}
