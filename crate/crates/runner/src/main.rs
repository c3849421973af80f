use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfg_runner::{load_config, run_experiment, run_oracle, ExperimentConfig, Overrides, Result};

#[derive(Parser)]
#[command(
    name = "mfg-irl",
    version,
    about = "Learn ε-Nash equilibria of LQG mean-field games from simulated data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm for every seed.
    Run(RunArgs),
    /// Compute the model-based truth only.
    Oracle(RunArgs),
    /// Parse and validate a config.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Run this seed only.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation and quadrature step.
    #[arg(long)]
    substep: Option<f64>,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config)?;
    Overrides {
        seed: args.seed,
        out: args.out.clone(),
        substep: args.substep,
    }
    .apply(&mut cfg)?;
    Ok(cfg)
}

fn init_threads() {
    if let Some(n) = std::env::var("MFG_IRL_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok ({:?}, n = {}, m = {}, {} seeds)",
                config.display(),
                cfg.algorithm,
                cfg.model.n(),
                cfg.model.m(),
                cfg.seeds.len()
            );
            Ok(0)
        }
        Command::Oracle(args) => {
            let cfg = load(&args)?;
            let (truth, files) = run_oracle(&cfg)?;
            println!("K1* = {:?}", truth.k1.as_slice());
            println!("K2* = {:?}", truth.k2.as_slice());
            println!(
                "wrote {} files to {}",
                files.len(),
                cfg.output_dir.display()
            );
            Ok(0)
        }
        Command::Run(args) => {
            let cfg = load(&args)?;
            let outcome = run_experiment(&cfg)?;
            for r in &outcome.reports {
                let t = r.timings;
                println!(
                    "seed {}: {} feedback iterations{}, consistency {:.4} ({:.1}s: simulate {:.1}, regress {:.1}, solve {:.2}, rollout {:.1})",
                    r.seed,
                    r.solution.feedback_history.len(),
                    r.solution
                        .feedforward_history
                        .as_ref()
                        .map_or(String::new(), |h| format!(", {} feedforward", h.len())),
                    r.consistency.relative(),
                    t.total(),
                    t.simulation,
                    t.regression,
                    t.solve,
                    t.rollout
                );
                for row in &r.error_table {
                    println!("  {:<8} {:.4e}", row.label, row.error);
                }
            }
            for (seed, e) in &outcome.failures {
                eprintln!("seed {seed} failed: {e}");
            }
            println!(
                "wrote {} files to {}",
                outcome.files.len() + 1,
                cfg.output_dir.display()
            );
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
