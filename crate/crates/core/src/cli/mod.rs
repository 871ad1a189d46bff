//! Command-line front end.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 domain or hull
//! error, 3 IO, parse or configuration error.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{ConfigError, RunConfig};

use crate::diagnostics::DiagnosticsError;
use crate::geometry::GeometryError;
use crate::interpolation::InterpolationError;
use crate::io::IoError;
use crate::maxent::LmeError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

const CONFIG_HELP: &str = "\
Configuration file (--config): one `key = value` per line, `#` starts a
comment line. Lists are comma separated. Precedence: flags > --set >
file > defaults. Unknown keys are rejected.

Keys and defaults:
  gamma = 1.8            epsilon = 2.0           s = 3.0
  theta = 1e-8           h = (unset)             h_list = 0.2,0.1,0.05,0.025
  dim = 2                lo = 0                  hi = 1
  seed = 0               jitter = 0              sweep_jitter = 0.2
  probe_divisor = 3      n_probes = 200          closed_form_points = 20
  field = sinusoid       rate_value_min = 1.7    rate_value_max = 2.3
  rate_grad_min = 0.7    rate_grad_max = 1.3     face = 0
  rho_list = (geometric 0.5h .. 1e-3h)           rho_count = 12
  tangential_offset = 0.3  delta = 1.0  eta = 0.25  boundary_s = 2.0
  far_r = 0.5,1,1.5,2,3,4  fault = none           out, csv, quiet

`--h` takes a comma list; a single value also sets `h`.
Exit codes: 0 pass, 1 check failure, 2 domain/hull error, 3 IO/parse.";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => EXIT_DOMAIN,
            _ => EXIT_INPUT,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<LmeError> for CliError {
    fn from(e: LmeError) -> Self {
        match e {
            LmeError::InvalidParameter(_) | LmeError::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            LmeError::NoNodesInRange => {
                CliError::Domain("evaluation point is outside the node cloud: no nodes in range".into())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Lme(e) => e.into(),
            DiagnosticsError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<InterpolationError> for CliError {
    fn from(e: InterpolationError) -> Self {
        match e {
            InterpolationError::Lme(e) => e.into(),
            InterpolationError::Geometry(e) => e.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "lme", version, about = "Local maximum-entropy approximation toolkit", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Locality parameter; the Gaussian weight is `γ / h²`.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Comma-separated list of h values.
    #[arg(long, global = true, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    /// Spatial dimension of generated node sets.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Seed for jitter and random probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress stdout output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override any config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a node set (CSV or JSON by the --out extension).
    Gen,
    /// Shape functions at one point of a node-set file.
    Eval {
        /// Node-set file (.csv or .json).
        points: PathBuf,
        /// Evaluation point, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        x: Vec<f64>,
    },
    /// Run the diagnostics suite.
    Verify {
        /// Fault-injection hook for testing the failure path.
        #[arg(long)]
        fault: Option<String>,
    },
    /// Interpolation error study for a built-in field.
    Converge {
        /// affine, quadratic, sinusoid or gaussian-bump.
        #[arg(long)]
        field: Option<String>,
        /// CSV output path (default: --out with a .csv extension).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Boundary-layer scaling probe and far-node check.
    Boundary {
        #[arg(long)]
        face: Option<usize>,
        /// Comma-separated, strictly decreasing probe distances.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
    },
}

fn build_config(common: &Common, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(g) = common.gamma {
        cfg.gamma = g;
    }
    if let Some(h) = &common.h {
        if h.len() == 1 {
            cfg.h = Some(h[0]);
        }
        cfg.h_list = h.clone();
    }
    if let Some(d) = common.dim {
        cfg.dim = d;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    cfg.quiet |= common.quiet;
    match command {
        Command::Verify { fault: Some(f) } => cfg.set("fault", f)?,
        Command::Converge { field, csv } => {
            if let Some(f) = field {
                cfg.field = f.clone();
            }
            if let Some(c) = csv {
                cfg.csv = Some(c.clone());
            }
        }
        Command::Boundary { face, rho } => {
            if let Some(f) = face {
                cfg.face = *f;
            }
            if let Some(r) = rho {
                cfg.rho_list = r.clone();
            }
        }
        _ => {}
    }
    Ok(cfg)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(args) {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let result = build_config(&parsed.common, &parsed.command).and_then(|cfg| {
        let outcome = match &parsed.command {
            Command::Gen => commands::gen(&cfg)?,
            Command::Eval { points, x } => commands::eval(&cfg, points, x)?,
            Command::Verify { .. } => commands::verify(&cfg)?,
            Command::Converge { .. } => commands::converge(&cfg)?,
            Command::Boundary { .. } => commands::boundary(&cfg)?,
        };
        commands::emit(&cfg, &outcome)?;
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
