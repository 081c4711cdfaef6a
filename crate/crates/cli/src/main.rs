use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tsobs::lmi::Objective;
use tsobs_cli::{execute, Command, ExitStatus, Invocation};

#[derive(Parser, Debug)]
#[command(name = "tsobs", version, about = "Adaptive observer design, certification and simulation for Takagi-Sugeno systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides outputs.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// min_beta, max_gamma or feasibility.
    #[arg(long, global = true)]
    objective: Option<Objective>,
    /// Seed for PRBS inputs and the robust-stability spot check.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integration step in seconds.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Simulation horizon in seconds.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Solve the synthesis conditions and certify the result.
    Design,
    /// Simulate plant and observer for the configured scenario.
    Simulate,
    /// Re-verify an existing design file.
    Certify,
    /// Run the embedded three-state benchmark end to end.
    ReproduceExample,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TSOBS_LOG", "warn")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Design => Command::Design,
        Cmd::Simulate => Command::Simulate,
        Cmd::Certify => Command::Certify,
        Cmd::ReproduceExample => Command::ReproduceExample,
    };
    let inv = Invocation {
        config: cli.config,
        out: cli.out,
        objective: cli.objective,
        seed: cli.seed,
        dt: cli.dt,
        t_end: cli.t_end,
    };
    let outcome = execute(command, &inv);
    for m in &outcome.messages {
        if outcome.status == ExitStatus::Success || !m.starts_with("error:") {
            println!("{m}");
        } else {
            eprintln!("{m}");
        }
    }
    for f in &outcome.files {
        log::info!("wrote {}", f.display());
    }
    std::process::exit(outcome.code());
}
