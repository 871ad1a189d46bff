//! Run configuration: defaults, a flat `key = value` file format and
//! per-key overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {msg}")]
    BadValue { key: String, msg: String },
}

/// Every knob of the command-line tool. Output paths and verbosity are not
/// part of the echoed configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub gamma: f64,
    pub epsilon: f64,
    /// Decay exponent for the decay check.
    pub s: f64,
    pub theta: f64,
    /// Single spacing for `gen`, `eval` and `boundary`; `eval` derives one
    /// from the point set when unset, the others fall back to `0.1`.
    pub h: Option<f64>,
    pub h_list: Vec<f64>,
    pub dim: usize,
    /// Box corners; a single value applies to every axis.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub seed: u64,
    /// Jitter of generated nodes for `gen`, `converge` and `boundary`.
    pub jitter: f64,
    /// Jitter of the node sets in the `verify` h-sweeps.
    pub sweep_jitter: f64,
    pub probe_divisor: f64,
    /// Random interior probes for the consistency suite.
    pub n_probes: usize,
    /// Interior points for the one-dimensional closed-form comparison.
    pub closed_form_points: usize,
    pub field: String,
    pub rate_value_min: f64,
    pub rate_value_max: f64,
    pub rate_grad_min: f64,
    pub rate_grad_max: f64,
    pub face: usize,
    /// Explicit probe distances; geometric from `0.5h` to `1e-3h` if empty.
    pub rho_list: Vec<f64>,
    pub rho_count: usize,
    pub tangential_offset: f64,
    pub delta: f64,
    pub eta: f64,
    /// Weight exponent for the boundary gradient and far-node measures.
    pub boundary_s: f64,
    /// Multiples of `h` for the far-node sweep.
    pub far_r: Vec<f64>,
    /// Test hook: `none` or `scale_weights` (corrupts weights by 1e-6).
    pub fault: String,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub csv: Option<PathBuf>,
    #[serde(skip)]
    pub quiet: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gamma: 1.8,
            epsilon: 2.0,
            s: 3.0,
            theta: 1e-8,
            h: None,
            h_list: vec![0.2, 0.1, 0.05, 0.025],
            dim: 2,
            lo: vec![0.0],
            hi: vec![1.0],
            seed: 0,
            jitter: 0.0,
            sweep_jitter: 0.2,
            probe_divisor: 3.0,
            n_probes: 200,
            closed_form_points: 20,
            field: "sinusoid".into(),
            rate_value_min: 1.7,
            rate_value_max: 2.3,
            rate_grad_min: 0.7,
            rate_grad_max: 1.3,
            face: 0,
            rho_list: Vec::new(),
            rho_count: 12,
            tangential_offset: 0.3,
            delta: 1.0,
            eta: 0.25,
            boundary_s: 2.0,
            far_r: vec![0.5, 1.0, 1.5, 2.0, 3.0, 4.0],
            fault: "none".into(),
            out: None,
            csv: None,
            quiet: false,
        }
    }
}

pub const FAULTS: [&str; 2] = ["none", "scale_weights"];

fn number<V: std::str::FromStr>(key: &str, value: &str) -> Result<V, ConfigError>
where
    V::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: V::Err| ConfigError::BadValue { key: key.into(), msg: format!("{value:?}: {e}") })
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| number(key, v)).collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "gamma" => self.gamma = number(key, v)?,
            "epsilon" => self.epsilon = number(key, v)?,
            "s" => self.s = number(key, v)?,
            "theta" => self.theta = number(key, v)?,
            "h" => self.h = Some(number(key, v)?),
            "h_list" => self.h_list = list(key, v)?,
            "dim" => self.dim = number(key, v)?,
            "lo" => self.lo = list(key, v)?,
            "hi" => self.hi = list(key, v)?,
            "seed" => self.seed = number(key, v)?,
            "jitter" => self.jitter = number(key, v)?,
            "sweep_jitter" => self.sweep_jitter = number(key, v)?,
            "probe_divisor" => self.probe_divisor = number(key, v)?,
            "n_probes" => self.n_probes = number(key, v)?,
            "closed_form_points" => self.closed_form_points = number(key, v)?,
            "field" => self.field = v.to_string(),
            "rate_value_min" => self.rate_value_min = number(key, v)?,
            "rate_value_max" => self.rate_value_max = number(key, v)?,
            "rate_grad_min" => self.rate_grad_min = number(key, v)?,
            "rate_grad_max" => self.rate_grad_max = number(key, v)?,
            "face" => self.face = number(key, v)?,
            "rho_list" => self.rho_list = list(key, v)?,
            "rho_count" => self.rho_count = number(key, v)?,
            "tangential_offset" => self.tangential_offset = number(key, v)?,
            "delta" => self.delta = number(key, v)?,
            "eta" => self.eta = number(key, v)?,
            "boundary_s" => self.boundary_s = number(key, v)?,
            "far_r" => self.far_r = list(key, v)?,
            "fault" => {
                if !FAULTS.contains(&v) {
                    return Err(ConfigError::BadValue { key: key.into(), msg: format!("expected one of {FAULTS:?}, got {v:?}") });
                }
                self.fault = v.to_string();
            }
            "out" => self.out = Some(PathBuf::from(v)),
            "csv" => self.csv = Some(PathBuf::from(v)),
            "quiet" => self.quiet = number(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every setting of a config file. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: k + 1, text: line.to_string() })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: k + 1, text: line.to_string() });
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        self.apply_text(&text)
    }

    /// `lo`/`hi` expanded to `dim` coordinates.
    pub fn box_corners(&self) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
        let expand = |key: &str, v: &[f64]| match v.len() {
            1 => Ok(vec![v[0]; self.dim]),
            n if n == self.dim => Ok(v.to_vec()),
            n => Err(ConfigError::BadValue { key: key.into(), msg: format!("{n} values for a {}-d box", self.dim) }),
        };
        Ok((expand("lo", &self.lo)?, expand("hi", &self.hi)?))
    }

    pub fn h_or(&self, default: f64) -> f64 {
        self.h.unwrap_or(default)
    }
}
