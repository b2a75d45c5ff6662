//! Command-line orchestration: TOML configuration, one subcommand per
//! experiment, CSV tables and a plain-text manifest per run.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numeric or
//! assumption failure.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{
    AdmissibleConfig, CarlemanConfig, ConfigError, EllipticConfig, GeometryConfig, InteriorKind, InverseConfig,
    OutputConfig, PerturbationConfig, RunConfig, Validated,
};
pub use manifest::{Manifest, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Direct,
    Elliptic,
    Carleman,
    LemmaInv,
    Stability,
    Factory,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Direct => "direct",
            Command::Elliptic => "elliptic",
            Command::Carleman => "carleman",
            Command::LemmaInv => "lemma-inv",
            Command::Stability => "stability",
            Command::Factory => "factory",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One invocation: a subcommand plus the command-line overrides.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads; `None` or 0 lets the pool decide.
    pub threads: Option<usize>,
}

impl Invocation {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            config: None,
            out: None,
            seed: None,
            threads: None,
        }
    }
}

/// Failure of a run, classified for the exit code.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io { path: PathBuf, source: std::io::Error },
    Numeric { stage: &'static str, source: crate::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => EXIT_CONFIG,
            RunError::Numeric { .. } => EXIT_NUMERIC,
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Io { .. } => "output",
            RunError::Numeric { stage, .. } => stage,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid config: {e}"),
            RunError::Io { path, source } => write!(f, "cannot write {}: {source}", path.display()),
            RunError::Numeric { stage, source } => write!(f, "stage `{stage}` failed: {source}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Sole writer to the output directory.
pub(crate) struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn io_err(&self, name: &str, source: std::io::Error) -> RunError {
        RunError::Io {
            path: self.dir.join(name),
            source,
        }
    }

    pub(crate) fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), body).map_err(|e| self.io_err(name, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub(crate) fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(fs::File) -> csv::Result<()>,
    ) -> Result<(), RunError> {
        let file = fs::File::create(self.dir.join(name)).map_err(|e| self.io_err(name, e))?;
        write(file).map_err(|e| self.io_err(name, std::io::Error::other(e)))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Result of [`run`]: the exit code and where the artifacts went.
#[derive(Debug)]
pub struct RunSummary {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub manifest: Option<Manifest>,
    pub error: Option<String>,
}

fn load_config(inv: &Invocation) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &inv.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &inv.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Runs one subcommand end to end. Configuration problems are reported
/// before anything is written; later failures still leave a manifest and a
/// `diagnostics.txt` naming the failing stage.
pub fn run(inv: &Invocation) -> RunSummary {
    let start = Instant::now();
    let cfg = match load_config(inv) {
        Ok(c) => c,
        Err(e) => return failed_early(RunError::Config(e)),
    };
    let valid = match cfg.validate() {
        Ok(v) => v,
        Err(e) => return failed_early(RunError::Config(e)),
    };
    let dir = PathBuf::from(&cfg.output.dir);
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => return failed_early(e),
    };
    let mut manifest = Manifest::new(inv.command, &cfg);

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(inv.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            return failed_early(RunError::Config(ConfigError {
                key: "threads".into(),
                reason: e.to_string(),
            }))
        }
    };
    manifest.threads = pool.current_num_threads();

    let result = out
        .text("config.toml", &cfg.to_toml())
        .and_then(|_| pool.install(|| commands::dispatch(inv.command, &cfg, &valid, &mut out, &mut manifest)));
    manifest.wall_time_s = start.elapsed().as_secs_f64();

    let (exit_code, error) = match &result {
        Ok(()) => {
            manifest.outcome = Outcome::Ok;
            (EXIT_OK, None)
        }
        Err(e) => {
            manifest.outcome = Outcome::Failed {
                stage: e.stage().to_string(),
                error: e.to_string(),
            };
            // Best effort: the directory may be the thing that failed.
            let _ = out.text("diagnostics.txt", &format!("stage = {}\nerror = {e}\n", e.stage()));
            (e.exit_code(), Some(e.to_string()))
        }
    };
    manifest.files = out.files.clone();
    let written = out.text("manifest.toml", &manifest.render());
    let exit_code = match (exit_code, written) {
        (EXIT_OK, Err(e)) => return failed_early(e),
        (code, _) => code,
    };
    RunSummary {
        exit_code,
        out_dir: Some(dir),
        manifest: Some(manifest),
        error,
    }
}

fn failed_early(e: RunError) -> RunSummary {
    RunSummary {
        exit_code: e.exit_code(),
        out_dir: None,
        manifest: None,
        error: Some(e.to_string()),
    }
}
