//! `dilation`: command-line front end to `dilation-core`.
//!
//! Exit codes: 0 success, 1 a verification failed (residual above
//! tolerance), 2 bad input.

mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Serialize, Debug)]
#[command(name = "dilation", version, about = "Transfer operators, path-space measures and scaling operators on finite-to-one maps")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct Common {
    /// System description (JSON).
    #[arg(long, global = true)]
    pub system: Option<PathBuf>,
    /// Output directory for reports and arrays.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Where the weight `W` comes from.
#[derive(Args, Serialize, Debug, Clone)]
pub struct WeightSource {
    /// Filter JSON; `W = |m0|^2 / #r^{-1}`.
    #[arg(long, conflicts_with = "weight")]
    pub filter: Option<PathBuf>,
    /// Weight as a cylinder CSV (`word,value`).
    #[arg(long)]
    pub weight: Option<PathBuf>,
}

#[derive(Subcommand, Serialize, Debug)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Validate a system and print its structure.
    SystemInfo,
    /// Harmonic function `R_W h = h` and eigenmeasure `nu R_W = nu`.
    TransferFixpoint {
        #[command(flatten)]
        source: WeightSource,
        /// Sampling depth for filters.
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Divide `W` by its dominant eigenvalue before solving.
        #[arg(long)]
        rescale: bool,
    },
    /// Invariance or strong invariance of a measure.
    MeasureCheck {
        /// Measure JSON (`bernoulli`, `cylinder`, `cloud`, `brolin`, `balanced`).
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Strong)]
        mode: Mode,
        /// Depth of the test cylinders (symbolic measures).
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Tolerance for cylinder measures.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// Allowed standard errors for point clouds.
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
    /// Sample finite backward paths `(x_0, ..., x_n)` from the path-space measure.
    PathsSample {
        #[command(flatten)]
        source: WeightSource,
        /// Measure JSON; default is the strongly invariant measure of the system.
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Consistency of `omega_n`, and isometry/covariance of `U` on random martingales.
    MartingaleVerify {
        /// Filter JSON (needed for `U`).
        #[arg(long)]
        filter: PathBuf,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Highest level.
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Number of random martingales.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Scalar QMF condition and isometry of `S f = m0 (f o r)`.
    FilterCheck {
        #[arg(long)]
        filter: PathBuf,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// Number of sample points for the QMF condition.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// `phi_hat` by the infinite product on a grid, plus `int |phi_hat|^2`.
    ScalingFunction {
        #[arg(long)]
        filter: PathBuf,
        /// Number of product factors.
        #[arg(long = "K", default_value_t = 30)]
        k: usize,
        /// `start:stop:step`.
        #[arg(long, default_value = "-8:8:0.01")]
        x_grid: String,
        /// Cascade iterations to run and export (0 = none).
        #[arg(long, default_value_t = 0)]
        cascade: usize,
        /// Tolerance on `|1 - int |phi_hat|^2|`.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Quadrature half-width.
        #[arg(long, default_value_t = 1000.0)]
        x_max: f64,
    },
    /// Lift or detail of a multiplicity function.
    Multiplicity {
        /// `word,value` CSV; `inf` allowed.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: Op,
    },
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Invariance,
    Strong,
}

#[derive(ValueEnum, Serialize, Debug, Clone, Copy)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Lift,
    Detail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
