//! Command-line front end: flags or a config file in, a versioned JSON or
//! CSV result envelope out.
//!
//! Exit status is 0 on success, 1 when a run fails (including a failing
//! `validate` criterion) and 2 for configuration and I/O errors. Errors
//! are reported on standard error as a single JSON object.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Command, Format, PartialConfig, RunConfig};
pub use output::{emit, emit_csv, from_json, to_csv, to_json};
pub use run::{run, ResultEnvelope, Results, SCHEMA_VERSION};

use clap::Parser;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("results of {0} have no tabular form")]
    NotTabular(String),

    #[error(transparent)]
    Run(#[from] pv_extremes::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::NotTabular(_) => "not_tabular",
            CliError::Run(_) => "run",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Serialize)]
struct ErrorPayload<'a> {
    schema_version: &'a str,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

fn error_json(kind: &str, message: String, exit_code: i32) -> String {
    serde_json::to_string(&ErrorPayload {
        schema_version: SCHEMA_VERSION,
        error: ErrorBody {
            kind,
            message,
            exit_code,
        },
    })
    .expect("serializable")
}

/// Simulation and closed forms for the far vertex distance of the typical
/// Poisson-Voronoi cell.
#[derive(Debug, Parser)]
#[command(name = "pvx", version, allow_negative_numbers = true)]
pub struct Args {
    /// Experiment to run; may instead come from the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Config file, JSON or `key = value` lines. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dimension (2 to 12).
    #[arg(long)]
    pub d: Option<usize>,
    /// Exponent of the radial-power intensity `|x|^alpha`; 0 is homogeneous.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Distance threshold or comma-separated grid.
    #[arg(long, alias = "t-grid", value_delimiter = ',', num_args = 1..)]
    pub t: Option<Vec<f64>>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Master seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Window side of `extremal-index`; the intensity is `n^d`.
    #[arg(long)]
    pub n: Option<f64>,
    /// Run `validate` at the full replicate counts.
    #[arg(long)]
    pub deep: bool,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Args {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            command: self.command,
            d: self.d,
            alpha: self.alpha,
            t: self.t.clone(),
            reps: self.reps,
            seed: self.seed,
            workers: self.workers,
            n: self.n,
            deep: self.deep.then_some(true),
            out: self.out.clone(),
            format: self.format,
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => PartialConfig::load(p)?,
            None => PartialConfig::default(),
        };
        RunConfig::resolve(self.flags().or(file))
    }
}

/// Runs the command line `argv` and returns the process exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("{}", error_json("config", e.to_string().trim_end().to_string(), 2));
            return 2;
        }
    };
    let result = args.resolve().and_then(|cfg| {
        let env = run(&cfg)?;
        emit(&env)?;
        Ok(env)
    });
    match result {
        Ok(env) if env.passed() => 0,
        Ok(_) => 1,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), e.to_string(), e.exit_code()));
            e.exit_code()
        }
    }
}
