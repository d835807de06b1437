//! `carnot`: batch driver for the checks and estimates of the toolkit.
//!
//! Exit status: 0 when every asserted check passes, 2 on a failed check,
//! 3 on bad input, 4 on a numerical or conditioning failure.

mod commands;
mod config;
mod error;
mod report;

use clap::{Parser, Subcommand};
use config::{GroupName, RunConfig};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "carnot", version, about = "Numerical checks on filiform Carnot groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group axioms, commutator relations and frame invariance on random
    /// instances (n = 3..6 unless --n is given).
    VerifyAlgebra(Flags),
    /// Extremes of the pointwise norm estimates.
    VerifyBounds(Flags),
    /// Metropolis samples of the measure, written as a batch file and CSV.
    Sample(Flags),
    /// Two-constant U-bound fit with a holdout check.
    Ubound(Flags),
    /// q-Poincaré ratios and the candidate constant with a holdout check.
    Poincare(Flags),
    /// Galerkin spectral-gap estimate, or the Gaussian calibration.
    Gap(Flags),
    /// Poincaré ratios on a norm ball under Lebesgue measure.
    BallCheck(Flags),
    /// Translation trick and the three-region localisation identity.
    Localize(Flags),
    /// Approximate CC distance to --target, or an equivalence scan.
    Geodesic(Flags),
}

/// Every flag may also be given as a key of the --config JSON file; flags
/// win over the file.
#[derive(clap::Args)]
struct Flags {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Group: engel (the default) or filiform.
    #[arg(long, value_enum)]
    group: Option<GroupName>,
    /// Step n of G_{n+1} [default: 4 for filiform].
    #[arg(long)]
    n: Option<usize>,
    /// Measure scale a [default: 1].
    #[arg(long)]
    a: Option<f64>,
    /// Measure exponent p [default: n].
    #[arg(long)]
    p: Option<f64>,
    /// Sample count [default depends on the command: verify-algebra 1e5,
    /// verify-bounds 1e6, sample 1e5, ubound 1e6, poincare 1e6, gap 2e5
    /// (1e6 with --calibration), ball-check 1e5, localize 1e5].
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: carnot-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monomial degree of the gap basis [default: 3, 4 with --calibration].
    #[arg(long)]
    degree: Option<usize>,
    /// Ball radius for ball-check [default: 1].
    #[arg(long)]
    radius: Option<f64>,
    /// Exponent for ball-check [default: q = p/(p-1)].
    #[arg(long)]
    exponent: Option<f64>,
    /// Localisation threshold R [default: 1].
    #[arg(long)]
    r: Option<f64>,
    /// Localisation radius L [default: 2].
    #[arg(long)]
    l: Option<f64>,
    /// Family member localised by localize [default: 1].
    #[arg(long)]
    function: Option<usize>,
    /// Piecewise-constant control segments [default: 16].
    #[arg(long)]
    segments: Option<usize>,
    /// Optimiser restarts per segment count [default: 4].
    #[arg(long)]
    restarts: Option<usize>,
    /// Point count: invariance pairs for verify-algebra [default: 1000],
    /// translation samples for localize [default: 1e4], scan points for
    /// geodesic [default: 100].
    #[arg(long)]
    points: Option<usize>,
    /// Geodesic target, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
    /// Run the Gaussian calibration instead of a group measure (gap).
    #[arg(long)]
    calibration: bool,
}

impl Flags {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            group: self.group,
            n: self.n,
            a: self.a,
            p: self.p,
            samples: self.samples,
            seed: self.seed,
            out: self.out,
            degree: self.degree,
            radius: self.radius,
            exponent: self.exponent,
            r: self.r,
            l: self.l,
            function: self.function,
            segments: self.segments,
            restarts: self.restarts,
            points: self.points,
            target: self.target,
            calibration: self.calibration.then_some(true),
            perturbation: None,
        };
        Ok(file.overlay(flags))
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CARNOT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("CARNOT_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(command: Command) -> Result<u8, CliError> {
    configure_threads()?;
    let (run, flags): (fn(&RunConfig) -> Result<u8, CliError>, Flags) = match command {
        Command::VerifyAlgebra(f) => (commands::verify_algebra, f),
        Command::VerifyBounds(f) => (commands::verify_bounds, f),
        Command::Sample(f) => (commands::sample_measure, f),
        Command::Ubound(f) => (commands::ubound, f),
        Command::Poincare(f) => (commands::poincare, f),
        Command::Gap(f) => (commands::gap, f),
        Command::BallCheck(f) => (commands::ball_check, f),
        Command::Localize(f) => (commands::localize, f),
        Command::Geodesic(f) => (commands::geodesic, f),
    };
    run(&flags.resolve()?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("carnot: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
