//! Config-to-artifacts pipeline shared by the binary and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{check_tolerance, parse_config, ConfigError};
use crate::experiments::{self, Context, RunError};
use crate::output::{sha256_hex, write_all, Check, Manifest};

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    /// Worker threads; `None` lets rayon choose.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    ConfigError,
    Divergence,
    AcceptanceFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::ConfigError => 2,
            ExitStatus::Divergence => 3,
            ExitStatus::AcceptanceFailure => 4,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ExitStatus::Success => "success",
            ExitStatus::ConfigError => "config-error",
            ExitStatus::Divergence => "divergence",
            ExitStatus::AcceptanceFailure => "acceptance-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: ExitStatus,
    /// Set whenever outputs were written.
    pub out_dir: Option<PathBuf>,
    pub checks: Vec<Check>,
    pub message: Option<String>,
}

impl RunReport {
    fn config(e: ConfigError) -> Self {
        Self { status: ExitStatus::ConfigError, out_dir: None, checks: Vec::new(), message: Some(format!("config error at {e}")) }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> ConfigError {
    ConfigError::new("output", format!("{}: {e}", path.display()))
}

/// Runs the experiment described by the config file at `path`.
pub fn run(path: &Path, opts: &RunOptions) -> RunReport {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return RunReport::config(ConfigError::new("<file>", format!("{}: {e}", path.display()))),
    };
    run_text(&text, opts)
}

/// As [`run`], with the config given as a string.
pub fn run_text(text: &str, opts: &RunOptions) -> RunReport {
    match prepare(text, opts) {
        Ok(p) => execute(p, text, opts),
        Err(e) => RunReport::config(e),
    }
}

struct Prepared {
    plan: experiments::Plan,
    ctx: Context,
    out: PathBuf,
    experiment: String,
}

fn prepare(text: &str, opts: &RunOptions) -> Result<Prepared, ConfigError> {
    let mut cfg = parse_config(text)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = opts.tol {
        cfg.tolerance = Some(tol);
    }
    if let Some(t) = cfg.tolerance {
        check_tolerance(t)?;
    }
    if opts.jobs == Some(0) {
        return Err(ConfigError::new("--jobs", "must be at least 1"));
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| ConfigError::new("output", "no output directory; set `output` or pass --out"))?;
    let plan = experiments::prepare(&cfg)?;
    Ok(Prepared { plan, ctx: Context { seed: cfg.seed, tolerance: cfg.tolerance }, out, experiment: cfg.experiment.to_string() })
}

fn execute(p: Prepared, text: &str, opts: &RunOptions) -> RunReport {
    let existed = p.out.exists();
    if let Err(e) = fs::create_dir_all(&p.out) {
        return RunReport::config(io_error(&p.out, e));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j);
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| p.plan.execute(&p.ctx)),
        Err(e) => Err(RunError::Runtime(format!("thread pool: {e}"))),
    };
    let (status, artifacts, checks, message) = match result {
        Ok(o) => {
            let status = if o.passed() { ExitStatus::Success } else { ExitStatus::AcceptanceFailure };
            let failed: Vec<&str> = o.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let msg = (!failed.is_empty()).then(|| format!("failed checks: {}", failed.join(", ")));
            (status, o.artifacts, o.checks, msg)
        }
        Err(RunError::Config(e)) => {
            if !existed {
                let _ = fs::remove_dir_all(&p.out);
            }
            return RunReport::config(e);
        }
        Err(RunError::Divergence { message, artifacts }) => {
            (ExitStatus::Divergence, artifacts, Vec::new(), Some(format!("numerical divergence: {message}")))
        }
        Err(e @ RunError::Runtime(_)) => (ExitStatus::Divergence, Vec::new(), Vec::new(), Some(e.to_string())),
    };
    let manifest = Manifest {
        experiment: p.experiment,
        seed: p.ctx.seed,
        tolerance: p.ctx.tolerance,
        config_sha256: sha256_hex(text.as_bytes()),
        status: status.label().into(),
        exit_code: status.code(),
        error: message.clone(),
        checks: checks.clone(),
        files: Vec::new(),
    };
    if let Err(e) = write_all(&p.out, &artifacts, manifest) {
        return RunReport::config(io_error(&p.out, e));
    }
    RunReport { status, out_dir: Some(p.out), checks, message }
}

