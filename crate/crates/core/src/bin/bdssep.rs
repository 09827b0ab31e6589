use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdssep::experiments::{
    cmd_hitting, cmd_hydro, cmd_ldp, cmd_mixing, cmd_quasipotential, cmd_scaling, cmd_stationary, cmd_verify,
    exit_code, ExperimentConfig, Overrides, Report, EXIT_ACCEPTANCE, EXIT_OK,
};
use bdssep::Error;

/// Boundary driven symmetric simple exclusion: exact analysis, simulation
/// and macroscopic functionals.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; every field has a default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed; replicas draw independent streams from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Threads for sweeps and replicas; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest state space the exact solvers may build.
    #[arg(long, global = true)]
    cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary law, one-point densities and the product-measure check.
    Stationary,
    /// Exact and simulated hitting times of the target ball.
    Hitting,
    /// Exact mixing and relaxation times and coupling bounds.
    Mixing,
    /// Exponential scale of the mean hitting time across an N sweep.
    Scaling,
    /// Replica-averaged profiles against the heat equation.
    Hydro,
    /// Rate functional of the heat flow and of an optional straight path.
    Ldp,
    /// Entropy bound and numerical quasi-potential of one profile.
    Quasipotential,
    /// Acceptance suite.
    Verify {
        /// Make this criterion's bounds unattainable (harness self-test).
        #[arg(long)]
        perturb: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<i32, Error> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::defaults(),
    };
    let perturb = match cli.command {
        Command::Verify { perturb } => perturb,
        _ => None,
    };
    cfg.apply(&Overrides {
        seed: cli.common.seed,
        workers: cli.common.workers,
        cap: cli.common.cap,
        out: cli.common.out.clone(),
        perturb,
    })?;
    let (report, code): (Report, i32) = match cli.command {
        Command::Stationary => (cmd_stationary(&cfg)?, EXIT_OK),
        Command::Hitting => (cmd_hitting(&cfg)?, EXIT_OK),
        Command::Mixing => (cmd_mixing(&cfg)?, EXIT_OK),
        Command::Scaling => (cmd_scaling(&cfg)?, EXIT_OK),
        Command::Hydro => (cmd_hydro(&cfg)?, EXIT_OK),
        Command::Ldp => (cmd_ldp(&cfg)?, EXIT_OK),
        Command::Quasipotential => (cmd_quasipotential(&cfg)?, EXIT_OK),
        Command::Verify { .. } => {
            let (report, passed) = cmd_verify(&cfg, |r, secs| println!("{} [{secs:.1}s]", r.line()))?;
            (report, if passed { EXIT_OK } else { EXIT_ACCEPTANCE })
        }
    };
    for path in report.write(&cfg.run.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Capacity { cap, .. } = e {
                eprintln!("hint: the exact layer is capped at {cap} states; raise --cap or lower N");
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
