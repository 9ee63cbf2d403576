//! `qfpt`: run echo, Fisher-information and first-passage experiments from
//! TOML configs, writing CSV tables, SVG figures and a run manifest.

mod config;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qfpt_core::selftest::{run_selftest, SelftestOptions};

use crate::config::{config_error, ConfigError, ExperimentConfig, Kind};
use crate::run::{effective_config, write_manifest, Overrides};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qfpt",
    version,
    about = "Quantum first-passage uncertainty experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: out/<experiment>).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for stochastic experiments; overrides the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Exit nonzero on bound violations or unconverged QFI.
    #[arg(long)]
    strict: bool,
    /// Number of trajectories; overrides the config.
    #[arg(long, value_name = "N")]
    n_traj: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Loschmidt echo for K = 1..k_max.
    Echo(Common),
    /// Quantum Fisher information of the time-rescaling family.
    Qfi(Common),
    /// Exact mean and variance of the first-passage time.
    FptMoments(Common),
    /// Sample jump records.
    Trajectories(Common),
    /// QFI of the driven atom over a grid of decay rates.
    SweepKappa(Common),
    /// Random atom draws against both first-passage bounds.
    SweepRandom(Common),
    /// Echo estimated from ancilla coherence.
    Ancilla(Common),
    /// Classical echo and QFI against closed forms.
    ClassicalCheck(Common),
    /// Check the uncertainty relations.
    TurCheck(Common),
    /// Fast invariant suite.
    Selftest {
        /// Swap the Kronecker order of the jump lift (checks that the suite catches it).
        #[arg(long, hide = true)]
        corrupt_vec_convention: bool,
    },
}

impl Command {
    fn experiment(&self) -> Option<(Kind, &Common)> {
        Some(match self {
            Self::Echo(c) => (Kind::Echo, c),
            Self::Qfi(c) => (Kind::Qfi, c),
            Self::FptMoments(c) => (Kind::FptMoments, c),
            Self::Trajectories(c) => (Kind::Trajectories, c),
            Self::SweepKappa(c) => (Kind::SweepKappa, c),
            Self::SweepRandom(c) => (Kind::SweepRandom, c),
            Self::Ancilla(c) => (Kind::Ancilla, c),
            Self::ClassicalCheck(c) => (Kind::ClassicalCheck, c),
            Self::TurCheck(c) => (Kind::TurCheck, c),
            Self::Selftest { .. } => return None,
        })
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("QFPT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        config_error(format!(
            "QFPT_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn experiment(kind: Kind, common: &Common) -> anyhow::Result<u8> {
    let start = Instant::now();
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let ov = Overrides {
        seed: common.seed,
        n_traj: common.n_traj,
        out: common.out.clone(),
        strict: common.strict,
    };
    let strict = ov.strict || cfg.strict.unwrap_or(false);
    let config_text = effective_config(kind, &cfg, &ov);
    let seed = ov.seed.or(cfg.seed);
    let outcome = run::run(kind, cfg.clone(), &ov)?;
    let out = ov
        .out
        .clone()
        .or(cfg.out)
        .unwrap_or_else(|| run::default_out(kind));
    let manifest = write_manifest(
        &out,
        kind,
        &config_text,
        common.config.as_deref(),
        seed,
        &outcome,
        start.elapsed().as_secs_f64(),
    )?;
    println!("{kind}: {}", outcome.summary);
    for f in outcome.files.iter().chain([&manifest]) {
        println!("  wrote {}", f.display());
    }
    if strict && outcome.violations > 0 {
        eprintln!("strict mode: {} violation(s)", outcome.violations);
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Selftest {
            corrupt_vec_convention,
        } => {
            let report = run_selftest(SelftestOptions {
                corrupt_vec_convention: *corrupt_vec_convention,
            });
            print!("{report}");
            Ok(if report.all_passed() { 0 } else { EXIT_FAILURE })
        }
        cmd => {
            let (kind, common) = cmd.experiment().expect("experiment subcommand");
            experiment(kind, common)
        }
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}
