//! Numerical checks of the structural properties of LME shape functions:
//! consistency identities, decay and concentration, bounds on the dual
//! solution, the one-dimensional closed form and boundary-layer scalings.
//!
//! Checks never panic on bad numbers; they report. Every report converts
//! into a [`CheckReport`] with a uniform `check / params / measured / pass`
//! JSON shape.

mod boundary;
mod bounds;
mod consistency;
mod decay;

pub use boundary::{
    boundary_scaling_probe, default_corner_probes, default_rho_list, far_node_gradient_check, far_node_sweep,
    BoundaryOptions, BoundaryProbeReport, FarNodeReport,
};
pub use bounds::{check_dual_bounds, closed_form_lambda_1d, dual_bounds_sweep, BoundKind, BoundReport, DualBoundsMeasure};
pub use consistency::{
    check_consistency_suite, check_consistency_suite_with, scale_weights_fault, ConsistencyReport, ConsistencyTolerances,
    WeightFault,
};
pub use decay::{
    check_concentration, check_decay, concentration_sweep, decay_sweep, ConcentrationReport, DecayReport,
};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{generate_grid_points, lattice_probes, Domain, GeometryError, Point, PointSet};
use crate::maxent::{LmeError, LmeParams};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Lme(#[from] LmeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("x = {x} is not inside the open interval ({a}, {a} + {h})")]
    OutsideInterval { x: f64, a: f64, h: f64 },
    #[error("nodes violate the boundary gap: some node lies strictly between 0 and {eta}·h from the boundary")]
    EtaGapViolated { eta: f64 },
    #[error("invalid probe setup: {0}")]
    InvalidProbe(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Uniform JSON shape shared by all checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub params: Value,
    pub measured: Value,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, params: Value, measured: Value, pass: bool) -> Self {
        Self { check: check.into(), params, measured, pass }
    }
}

/// A family of generated node sets over one domain, used by the h-sweeps.
#[derive(Clone, Debug)]
pub struct Sweep<T> {
    pub domain: Domain<T>,
    pub h_list: Vec<T>,
    pub gamma: T,
    pub epsilon: T,
    pub jitter: T,
    pub seed: u64,
    /// Probe lattice spacing is `h / probe_divisor`.
    pub probe_divisor: T,
}

/// One refinement level of a [`Sweep`].
pub struct Level<T> {
    pub h: T,
    /// Replicated node sets; a single set unless the nodes are jittered.
    pub sets: Vec<PointSet<T>>,
    pub params: LmeParams<T>,
    pub probes: Vec<Point<T>>,
}

/// Cap on the number of jittered replicas per level.
pub const MAX_REPLICAS: usize = 4096;

impl<T: Real> Sweep<T> {
    pub fn new(domain: Domain<T>, h_list: Vec<T>, gamma: T, epsilon: T) -> Self {
        Self { domain, h_list, gamma, epsilon, jitter: T::zero(), seed: 0, probe_divisor: T::lit(3.0) }
    }

    /// Interior probes (`dist >= ε h`) at `h`.
    pub fn probes(&self, h: T) -> Result<Vec<Point<T>>, DiagnosticsError> {
        let probes = lattice_probes(&self.domain, h / self.probe_divisor, self.epsilon * h);
        if probes.is_empty() {
            return Err(DiagnosticsError::InvalidProbe(format!(
                "no probes at distance {}·h from the boundary for h = {h}",
                self.epsilon
            )));
        }
        Ok(probes)
    }

    /// Level at `h` with `replicas` node sets drawn from consecutive seeds.
    pub fn level(&self, h: T, replicas: usize) -> Result<Level<T>, DiagnosticsError> {
        let params = LmeParams::new(self.gamma, h)?;
        let probes = self.probes(h)?;
        let sets = (0..replicas.max(1))
            .map(|k| generate_grid_points(&self.domain, h, self.jitter, self.seed.wrapping_add(k as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Level { h, sets, params, probes })
    }

    /// All levels. With jitter, coarse levels get extra replicas so that
    /// every level samples about as many (probe, node set) pairs as the
    /// finest one; sup-type measures are then comparable across `h`.
    pub fn levels(&self) -> Result<Vec<Level<T>>, DiagnosticsError> {
        if self.h_list.is_empty() {
            return Err(DiagnosticsError::InvalidParameter("empty h list".into()));
        }
        let counts = self.h_list.iter().map(|&h| self.probes(h).map(|p| p.len())).collect::<Result<Vec<_>, _>>()?;
        let most = counts.iter().copied().max().unwrap_or(1);
        self.h_list
            .iter()
            .zip(&counts)
            .map(|(&h, &n)| {
                let replicas = if self.jitter > T::zero() { most.div_ceil(n).min(MAX_REPLICAS) } else { 1 };
                self.level(h, replicas)
            })
            .collect()
    }
}

/// `value / first` for every entry; `NaN` when `first` is not positive.
pub(crate) fn ratios_to_first(values: &[f64]) -> Vec<f64> {
    let first = values.first().copied().unwrap_or(f64::NAN);
    values.iter().map(|v| if first > 0.0 { v / first } else { f64::NAN }).collect()
}

/// True when every ratio lies in `[1/factor, factor]`.
pub(crate) fn within_factor(ratios: &[f64], factor: f64) -> bool {
    ratios.iter().all(|r| r.is_finite() && *r <= factor && *r >= 1.0 / factor)
}
