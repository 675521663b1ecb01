use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};
use plateau_cli::{run, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "plateau-p", version, about = "Singular sets of p-harmonic maps: solver, simulator and comparison")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines under `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for restarts (overrides `run.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Minimal chain for a boundary defect spec.
    Solve,
    /// Minimize the p-energy for one exponent.
    Simulate,
    /// Simulate every exponent of `simulate.p_list`.
    Sweep,
    /// Sweep and compare the concentration set with the solver optimum.
    Compare,
    /// Check a chain against a spec.
    Validate,
}

fn load(cli: &Cli) -> Result<RunConfig, plateau_cli::CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = plateau_cli::io::read_text(path)?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            RunConfig::parse(&text, &base)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLATEAU_P_LOG", "info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            error!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let mode = match cli.command {
        Command::Solve => Mode::Solve,
        Command::Simulate => Mode::Simulate,
        Command::Sweep => Mode::Sweep,
        Command::Compare => Mode::Compare,
        Command::Validate => Mode::Validate,
    };
    let result = load(&cli).and_then(|cfg| {
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        run(mode, &cfg, &out)
    });
    match result {
        Ok(summary) => {
            for a in &summary.artifacts {
                info!("wrote {}", a.display());
            }
            match summary.infeasible {
                Some(reason) => {
                    error!("infeasible: {reason}");
                    ExitCode::from(1)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
