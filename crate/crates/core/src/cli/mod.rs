//! Command-line orchestration: configuration parsing and validation,
//! scenario execution on a bounded worker pool, deterministic file output.

pub mod config;
pub mod output;
pub mod scenarios;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{Resolved, Scenario, ScenarioConfig, Violation};
pub use output::{Artifact, Manifest};

pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

const DEFAULT_OUTPUT_DIR: &str = "collshift-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{} invariant violation(s)", .0.len())]
    Validation(Vec<Violation>),
    #[error("{name}: {source}", name = .source.name())]
    Numerical {
        #[from]
        source: crate::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical { .. } => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "collshift", version, about = "Collisional clock-shift scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute the scenario named in the configuration.
    Run(RunArgs),
    /// Report every violated invariant; exit 0 iff the configuration is valid.
    Validate(ConfigArg),
}

#[derive(Debug, Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

/// Parses `text` as a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

fn read_config(path: &Path) -> Result<(Vec<u8>, ScenarioConfig), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(text)?;
    Ok((bytes, cfg))
}

/// Lists violated invariants of the configuration at `path`.
pub fn validate_file(path: &Path) -> Result<Vec<Violation>, CliError> {
    let (_, cfg) = read_config(path)?;
    Ok(cfg.resolve().err().unwrap_or_default())
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// Runs the scenario at `path`, writes its artifacts and manifest, and returns the output directory.
pub fn run_file(path: &Path, overrides: &RunOverrides) -> Result<PathBuf, CliError> {
    let (bytes, cfg) = read_config(path)?;
    let resolved = cfg.resolve().map_err(CliError::Validation)?;
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let workers = overrides.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Validation(vec![Violation {
            owner: "ScenarioConfig",
            message: "workers must be at least 1".into(),
        }]));
    }
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = overrides
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| config_dir.join(d)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))?;
    let artifacts = pool.install(|| scenarios::execute(&cfg, &resolved, seed, &config_dir))?;

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    for a in &artifacts {
        let target = out_dir.join(&a.name);
        std::fs::write(&target, &a.contents).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    }
    let manifest = Manifest::new(cfg.scenario.name(), &bytes, seed, workers, &artifacts);
    let manifest = output::json_artifact("manifest.json", &manifest);
    let target = out_dir.join(&manifest.name);
    std::fs::write(&target, &manifest.contents).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    Ok(out_dir)
}

fn report(err: &CliError) {
    match err {
        CliError::Validation(violations) => {
            for v in violations {
                eprintln!("{v}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

/// Entry point shared by the binary and the tests; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Validate(arg) => match validate_file(&arg.config) {
            Ok(violations) if violations.is_empty() => 0,
            Ok(violations) => {
                for v in &violations {
                    println!("{v}");
                }
                EXIT_VALIDATION
            }
            Err(e) => {
                report(&e);
                e.exit_code()
            }
        },
        Command::Run(args) => {
            let overrides = RunOverrides { seed: args.seed, workers: args.workers, output_dir: args.output_dir };
            match run_file(&args.config, &overrides) {
                Ok(dir) => {
                    println!("wrote {}", dir.display());
                    0
                }
                Err(e) => {
                    report(&e);
                    e.exit_code()
                }
            }
        }
    }
}
