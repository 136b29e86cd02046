//! `spinmem` command line: reproducible experiments driven by JSON configs.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod specs;

use config::{Experiment, ExperimentFile, DEFAULT_SEED};
use output::Artifacts;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or parameters. Exit code 2.
    Config(String),
    /// Computation failed. Exit code 1.
    Run(String),
    /// Output could not be written. Exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spinmem::Error> for CliError {
    fn from(e: spinmem::Error) -> Self {
        match e {
            spinmem::Error::Validation(_)
            | spinmem::Error::Dimension { .. }
            | spinmem::Error::TooLarge { .. }
            | spinmem::Error::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Run(format!("serialization: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinmem", version, about = "Associative-memory experiments on spin glasses and cavity networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every experiment. Each also reads `SPINMEM_<FLAG>`.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment file (JSON).
    #[arg(long, env = "SPINMEM_CONFIG", value_name = "PATH", conflicts_with = "bundled")]
    pub config: Option<PathBuf>,
    /// Use a bundled experiment file by name (see `spinmem configs`).
    #[arg(long, env = "SPINMEM_BUNDLED", value_name = "NAME")]
    pub bundled: Option<String>,
    /// Root seed; overrides the config file.
    #[arg(long, env = "SPINMEM_SEED", value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SPINMEM_OUT", value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, env = "SPINMEM_THREADS", value_name = "N")]
    pub threads: Option<usize>,
    /// Omit timing and other host-dependent fields so outputs are byte-reproducible.
    #[arg(long, env = "SPINMEM_DETERMINISTIC")]
    pub deterministic: bool,
    /// Write per-trial trajectories where the command supports them.
    #[arg(long, env = "SPINMEM_EMIT_TRAJECTORY")]
    pub emit_trajectory: bool,
    /// Parameter override `key.sub=value` (JSON value); repeatable. Applied after
    /// `SPINMEM_PARAM_*` variables.
    #[arg(long = "set", value_name = "KEY=VALUE", env = "SPINMEM_SET", value_delimiter = ';')]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hebbian capacity sweep over n and P.
    HopfieldCapacity {
        #[command(flatten)]
        common: Common,
        /// Network sizes (comma separated); overrides `n`.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// SK capacity and memory-fraction curves.
    Sk {
        #[command(flatten)]
        common: Common,
    },
    /// Cavity coupling matrix and kernel line scans.
    CavityJ {
        #[command(flatten)]
        common: Common,
        /// Cross-check the closed-form kernel against the explicit mode sum.
        #[arg(long)]
        mode_sum_check: bool,
    },
    /// One semiclassical recall trial.
    Recall {
        #[command(flatten)]
        common: Common,
    },
    /// Memory discovery pipeline on an SK, Hopfield or semiclassical network.
    Discover {
        #[command(flatten)]
        common: Common,
    },
    /// List bundled configs, or print one.
    Configs { name: Option<String> },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::HopfieldCapacity { .. } => "hopfield-capacity",
            Command::Sk { .. } => "sk",
            Command::CavityJ { .. } => "cavity-j",
            Command::Recall { .. } => "recall",
            Command::Discover { .. } => "discover",
            Command::Configs { .. } => "configs",
        }
    }
}

fn resolve(name: &str, common: &Common, env: &[(String, String)]) -> Result<Experiment, CliError> {
    let (file, base_dir) = match (&common.config, &common.bundled) {
        (Some(path), _) => {
            let base = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            (config::load_file(path)?, base)
        }
        (None, Some(b)) => {
            let text = config::bundled(b).ok_or_else(|| CliError::Config(format!("no bundled config {b:?}")))?;
            (config::parse_file(text, b)?, PathBuf::from("."))
        }
        (None, None) => (ExperimentFile::default(), PathBuf::from(".")),
    };
    if let Some(c) = &file.command {
        if c != name {
            return Err(CliError::Config(format!("config is for `{c}`, not `{name}`")));
        }
    }
    let mut params = file.params;
    config::apply_env(&mut params, env.iter().cloned())?;
    for s in &common.set {
        config::apply_set(&mut params, s)?;
    }
    let threads = common.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be >= 1".into()));
    }
    Ok(Experiment {
        command: name.to_string(),
        seed: common.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads,
        deterministic: common.deterministic || file.deterministic.unwrap_or(false),
        emit_trajectory: common.emit_trajectory,
        out: common.out.clone(),
        base_dir,
        params,
        started: Instant::now(),
    })
}

/// Runs a parsed command line; returns the paths written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let env: Vec<(String, String)> = std::env::vars().collect();
    run_with_env(cli, &env)
}

pub fn run_with_env(cli: Cli, env: &[(String, String)]) -> Result<Vec<PathBuf>, CliError> {
    let name = cli.command.name();
    let (common, extra) = match &cli.command {
        Command::Configs { name } => {
            match name {
                None => {
                    for (k, _) in config::BUNDLED {
                        println!("{k}");
                    }
                }
                Some(n) => print!("{}", config::bundled(n).ok_or_else(|| CliError::Config(format!("no bundled config {n:?}")))?),
            }
            return Ok(Vec::new());
        }
        Command::HopfieldCapacity { common, n } => (common, n.as_ref().map(|n| ("n", serde_json::json!(n)))),
        Command::CavityJ { common, mode_sum_check } => (common, mode_sum_check.then(|| ("mode_sum_check", serde_json::json!(true)))),
        Command::Sk { common } | Command::Recall { common } | Command::Discover { common } => (common, None),
    };
    let mut exp = resolve(name, common, env)?;
    if let Some((k, v)) = extra {
        config::set_path(&mut exp.params, &[k], v)?;
    }
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = exp.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| CliError::Run(format!("thread pool: {e}")))?
    };
    let artifacts: Artifacts = pool.install(|| match &cli.command {
        Command::HopfieldCapacity { .. } => commands::hopfield::run(&exp),
        Command::Sk { .. } => commands::sk::run(&exp),
        Command::CavityJ { .. } => commands::cavity::run(&exp),
        Command::Recall { .. } => commands::recall::run(&exp),
        Command::Discover { .. } => commands::discover::run(&exp),
        Command::Configs { .. } => unreachable!(),
    })?;
    artifacts.commit(&exp.out)
}
