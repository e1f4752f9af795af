use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use helmdd_cli::run::{run_experiment, run_ramp, write_artifacts, EXIT_CONFIG};
use helmdd_cli::ExperimentConfig;

#[derive(Parser)]
#[command(name = "helmdd", version, about = "Schwarz domain decomposition solvers for Helmholtz problems")]
struct Cli {
    /// Overrides `[output] directory`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `[solver] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once and write the convergence history.
    Solve { config: PathBuf },
    /// Solve and evaluate the convergence constants.
    Analyze { config: PathBuf },
    /// Run the frequency ramp of the `[ramp]` section.
    Ramp { config: PathBuf },
}

fn load(path: &PathBuf, cli: &Cli) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    let dir = cli.output_dir.clone().unwrap_or_else(|| cfg.output_dir());
    Ok((cfg, dir))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve { config } | Command::Analyze { config } => {
            let analyze = matches!(cli.command, Command::Analyze { .. });
            load(config, &cli).and_then(|(cfg, dir)| {
                let out = run_experiment(&cfg, analyze)?;
                write_artifacts(&cfg, &out, &dir)?;
                print!("{}", out.summary());
                Ok(out.exit_code())
            })
        }
        Command::Ramp { config } => load(config, &cli).and_then(|(cfg, dir)| {
            let rows = run_ramp(&cfg, Some(&dir))?;
            print!("{}", helmdd_cli::run::ramp_csv(&rows));
            Ok(0)
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG as u8)
        }
    }
}
