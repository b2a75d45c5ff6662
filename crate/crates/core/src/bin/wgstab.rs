use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waveguide_stability::harness::{run, Command, Invocation};

/// Stability experiments for the potential of a Schrödinger equation in a
/// cylindrical waveguide.
#[derive(Parser, Debug)]
#[command(name = "wgstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random test fields, overriding `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// One direct solve with diagnostics.
    Direct,
    /// Manufactured-solution study and resolvent bound of the Dirichlet solver.
    Elliptic,
    /// Weight certification, conjugation residual and Carleman ratio study.
    Carleman,
    /// Weighted inequality at t = 0 for a perturbed pair of runs.
    LemmaInv,
    /// Hölder stability sweep over perturbation amplitudes.
    Stability,
    /// Build the admissible pair (q0, u0) and its report.
    Factory,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Direct => Command::Direct,
        Cmd::Elliptic => Command::Elliptic,
        Cmd::Carleman => Command::Carleman,
        Cmd::LemmaInv => Command::LemmaInv,
        Cmd::Stability => Command::Stability,
        Cmd::Factory => Command::Factory,
    };
    let summary = run(&Invocation {
        command,
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
    });
    match (&summary.error, &summary.out_dir) {
        (Some(e), _) => log::error!("{command}: {e}"),
        (None, Some(dir)) => log::info!("{command}: done, artifacts in {}", dir.display()),
        (None, None) => {}
    }
    if let Some(m) = &summary.manifest {
        for (k, v) in &m.results {
            log::info!("  {k} = {v}");
        }
    }
    ExitCode::from(summary.exit_code as u8)
}
