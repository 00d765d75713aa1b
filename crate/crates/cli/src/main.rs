//! `relu-ntk`: closed-form ReLU NTK experiments from the command line.
//!
//! Exit codes: 0 success, 1 input/IO/parse error, 2 singular kernel,
//! 3 verification failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::KernelArgs;
use crate::config::{ExperimentConfig, KernelChoice, ProjectionChoice};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Singular(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Singular(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Singular(m) | CliError::Verification(m) => f.write_str(m),
        }
    }
}

impl From<relu_ntk::Error> for CliError {
    fn from(e: relu_ntk::Error) -> Self {
        match e {
            relu_ntk::Error::SingularKernel { .. } => CliError::Singular(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "relu-ntk",
    version,
    about = "Closed-form infinite-width ReLU neural tangent kernels"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $RELU_NTK_OUT, then ./out].
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of synthetic training points.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Synthetic input dimension.
    #[arg(long, global = true)]
    n0: Option<usize>,
    #[arg(long, global = true, value_enum)]
    projection: Option<ProjectionChoice>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write kernel matrices of a dataset as CSV.
    Kernel {
        /// CSV with coordinates followed by a label column.
        dataset: Option<PathBuf>,
        /// Use seeded uniform data instead of a file.
        #[arg(long)]
        synthetic: bool,
        /// Depths to write (comma separated or repeated).
        #[arg(long = "L", value_delimiter = ',')]
        depths: Vec<usize>,
        #[arg(long, alias = "kernel", value_enum)]
        kind: Option<KernelChoice>,
        /// Fail with exit code 2 if a matrix is numerically singular.
        #[arg(long)]
        check_invertible: bool,
    },
    /// Depth sweep of kernel values on synthetic data, as CSV and SVG.
    Sweep {
        #[arg(long = "L-max")]
        l_max: Option<usize>,
        /// One kernel family; all three when omitted.
        #[arg(long, value_enum)]
        kernel: Option<KernelChoice>,
    },
    /// Kernel regression predictions f_inf and f_tau on a test set.
    Predict {
        train: PathBuf,
        test: PathBuf,
        #[arg(long = "L")]
        depth: Option<usize>,
        #[arg(long, value_enum)]
        kernel: Option<KernelChoice>,
        /// Training times (comma separated or repeated).
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
    },
    /// Compare finite-width networks with the closed-form kernel and predictors.
    Verify {
        #[arg(long = "L")]
        depth: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        widths: Vec<usize>,
        /// Networks averaged per width.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Diagonal dominance, positive definiteness and determinant report over depth.
    Criteria {
        #[arg(long = "L-max")]
        l_max: Option<usize>,
        #[arg(long, value_enum)]
        kernel: Option<KernelChoice>,
    },
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_list<T>(slot: &mut Vec<T>, flag: Vec<T>) {
    if !flag.is_empty() {
        *slot = flag;
    }
}

fn merged_config(cli: &mut Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let common = &cli.common;
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    set(&mut cfg.seed, common.seed);
    set(&mut cfg.n, common.n);
    set(&mut cfg.n0, common.n0);
    set(&mut cfg.projection, common.projection);
    match &mut cli.command {
        Command::Kernel { depths, kind, .. } => {
            set_list(&mut cfg.depths, std::mem::take(depths));
            if kind.is_some() {
                cfg.kernel = *kind;
            }
        }
        Command::Sweep { l_max, kernel } | Command::Criteria { l_max, kernel } => {
            set(&mut cfg.l_max, *l_max);
            if kernel.is_some() {
                cfg.kernel = *kernel;
            }
        }
        Command::Predict { depth, kernel, tau, .. } => {
            set(&mut cfg.depth, *depth);
            if kernel.is_some() {
                cfg.kernel = *kernel;
            }
            set_list(&mut cfg.tau, std::mem::take(tau));
        }
        Command::Verify {
            depth,
            widths,
            seeds,
            lr,
            steps,
        } => {
            set(&mut cfg.depth, *depth);
            set_list(&mut cfg.widths, std::mem::take(widths));
            set(&mut cfg.seeds, *seeds);
            set(&mut cfg.lr, *lr);
            set(&mut cfg.steps, *steps);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(mut cli: Cli) -> Result<(), CliError> {
    let cfg = merged_config(&mut cli)?;
    let dir = cfg.output_dir();
    let (name, artifacts, summary, failure) = match &cli.command {
        Command::Kernel {
            dataset,
            synthetic,
            check_invertible,
            ..
        } => {
            let args = KernelArgs {
                dataset: dataset.as_deref(),
                synthetic: *synthetic,
                check_invertible: *check_invertible,
            };
            let (a, s) = commands::cmd_kernel(&cfg, args)?;
            ("kernel", a, s, None)
        }
        Command::Sweep { .. } => {
            let (a, s) = commands::cmd_sweep(&cfg)?;
            ("sweep", a, s, None)
        }
        Command::Criteria { .. } => {
            let (a, s) = commands::cmd_criteria(&cfg)?;
            ("criteria", a, s, None)
        }
        Command::Predict { train, test, .. } => {
            let (a, s) = commands::cmd_predict(&cfg, train, test)?;
            ("predict", a, s, None)
        }
        Command::Verify { .. } => {
            let (a, checks) = commands::cmd_verify(&cfg)?;
            let mut summary = String::new();
            for c in &checks {
                summary.push_str(&format!(
                    "check {}: {} {}\n",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail
                ));
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            let failure = (!failed.is_empty()).then(|| format!("verification failed: {}", failed.join(", ")));
            ("verify", a, summary, failure)
        }
    };
    let written = artifacts.write(&dir, name, &cfg)?;
    print!("{summary}");
    for path in written {
        println!("wrote {}", path.display());
    }
    match failure {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
