use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank_mde::commands;
use lowrank_mde::{ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "lowrank-mde", version, about = "Low-rank integration experiments for matrix differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write trajectory.csv.
    Run(Common),
    /// Final error against rank for each method; writes error_vs_rank.csv.
    SweepRank(Common),
    /// Final error against step size; writes error_vs_dt.csv.
    SweepDt(Common),
    /// Per-step wall time against n = s; writes scaling.csv.
    Scaling(Common),
    /// Error against a dense solve over time; writes error_vs_time.csv.
    Compare(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for column and row evaluation; 1 is the determinism reference.
    #[arg(long)]
    threads: Option<usize>,
    /// Write a binary state checkpoint every this many steps.
    #[arg(long)]
    checkpoint: Option<usize>,
}

fn execute(command: &Command) -> Result<Option<i32>, HarnessError> {
    let args = match command {
        Command::Run(a) | Command::SweepRank(a) | Command::SweepDt(a) | Command::Scaling(a) | Command::Compare(a) => a,
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    commands::apply_overrides(&mut cfg, args.out.as_deref(), args.seed, args.checkpoint);
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let failed_divergence = match command {
        Command::Run(_) => failure_code(commands::run(&cfg)?.failure),
        Command::Compare(_) => failure_code(commands::compare(&cfg)?.failure),
        Command::SweepRank(_) => {
            commands::sweep_rank(&cfg)?;
            None
        }
        Command::SweepDt(_) => {
            commands::sweep_dt(&cfg)?;
            None
        }
        Command::Scaling(_) => {
            commands::scaling(&cfg)?;
            None
        }
    };
    println!("wrote results to {}", cfg.output.dir.display());
    Ok(failed_divergence)
}

fn failure_code(f: Option<lowrank_mde::experiment::Failure>) -> Option<i32> {
    f.map(|f| {
        eprintln!("integration failed at t = {}: {}", f.t, f.message);
        if f.divergence {
            3
        } else {
            1
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
