//! Command-line workflows for `kerr-gates`.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure, 4 file-system error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

use commands::{Command, Job, Outcome};
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<kerr_gates::Error> for CliError {
    fn from(e: kerr_gates::Error) -> Self {
        use kerr_gates::Error::*;
        match e {
            NonFinite { .. } | AllRestartsAborted(_) | StepUnderflow { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kerr-gates", version, about = "Inverse design of two-qubit gates in Kerr waveguide arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Multi-restart optimization of the hopping rates for one target gate.
    Optimize(CommonArgs),
    /// Grid of optimizations over U/Jmax and block count.
    Sweep(CommonArgs),
    /// Cost, fidelity, leakage and transfer matrices of a parameter set.
    Evaluate(EvaluateArgs),
    /// Open-system fidelities over a grid of loss and dephasing rates.
    Lindblad(InputArgs),
    /// Monte Carlo over static parameter fluctuations.
    Robustness(InputArgs),
    /// Re-runs the job recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// cnot, ms or identity.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Kerr nonlinearity in units of Jmax.
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Parameter table (.csv) or circuit (.json) from an earlier run.
    #[arg(long)]
    pub params: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Also write the full 81x81 propagator.
    #[arg(long)]
    pub full_matrix: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Reads `--config` (or defaults) and applies the flag overrides.
pub fn resolve_config(args: &CommonArgs, command: Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json(&output::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = &args.target {
        cfg.target = t.to_ascii_lowercase();
    }
    if let Some(r) = args.restarts {
        cfg.optimizer.restarts = r;
    }
    if command == Command::Sweep {
        if let Some(u) = args.u {
            cfg.sweep.u_values = vec![u];
        }
        if let Some(b) = args.blocks {
            cfg.sweep.block_counts = vec![b];
        }
    } else {
        if let Some(u) = args.u {
            cfg.u_over_jmax = u;
        }
        if let Some(b) = args.blocks {
            cfg.blocks = b;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None | Some(0) => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let (common, command, params, full_matrix) = match &cli.verb {
        Verb::Optimize(c) => (c, Command::Optimize, None, false),
        Verb::Sweep(c) => (c, Command::Sweep, None, false),
        Verb::Evaluate(e) => (&e.input.common, Command::Evaluate, Some(&e.input.params), e.full_matrix),
        Verb::Lindblad(i) => (&i.common, Command::Lindblad, Some(&i.params), false),
        Verb::Robustness(i) => (&i.common, Command::Robustness, Some(&i.params), false),
        Verb::Replay(r) => return with_pool(r.jobs, || commands::replay(&r.manifest, &r.out_dir))?,
    };
    let config = resolve_config(common, command)?;
    let input_spec = params.map(|p| commands::load_params(p, &config)).transpose()?;
    let job = Job { command, config, input_spec, full_matrix };
    with_pool(common.jobs, || commands::execute(&job, &common.out_dir))?
}
