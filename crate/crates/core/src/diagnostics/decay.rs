use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::geometry::{Point, PointSet};
use crate::maxent::{shape_gradients, shape_values, LmeParams};
use crate::scalar::Real;

use super::{ratios_to_first, within_factor, CheckReport, DiagnosticsError, Sweep};

/// Allowed spread of the decay constant across an h-sweep.
pub const DECAY_UNIFORMITY: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub s: f64,
    /// Largest value over all levels.
    pub measured_c: f64,
    /// `(h, measured_c)` per level.
    pub per_h: Vec<(f64, f64)>,
    pub ratios: Vec<f64>,
    pub uniformity_factor: f64,
    pub failed_probes: usize,
    pub pass: bool,
}

impl DecayReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport::new(
            "decay",
            json!({ "s": self.s, "uniformity_factor": self.uniformity_factor }),
            json!({
                "measured_c": self.measured_c,
                "per_h": self.per_h,
                "ratios": self.ratios,
                "failed_probes": self.failed_probes,
            }),
            self.pass,
        )
    }
}

/// Sup over probes, active nodes and `|α| <= 1` of
/// `(1 + |x - x_a|²/h²)^s · h^|α| · |D^α w*_a(x)|`.
pub fn check_decay<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, s: T, probes: &[Point<T>]) -> DecayReport {
    let h = params.h.as_f64();
    let (c, failed) = decay_constant(set, params, s, probes);
    DecayReport {
        s: s.as_f64(),
        measured_c: c,
        per_h: vec![(h, c)],
        ratios: vec![1.0],
        uniformity_factor: DECAY_UNIFORMITY,
        failed_probes: failed,
        pass: c.is_finite() && failed == 0,
    }
}

fn decay_constant<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, s: T, probes: &[Point<T>]) -> (f64, usize) {
    let h = params.h;
    let per_probe: Vec<Option<f64>> = probes
        .par_iter()
        .map(|x| {
            let eval = shape_gradients(x, set, params).ok()?;
            let grads = eval.gradients.as_ref()?;
            let mut m = T::zero();
            for ((&a, &w), g) in eval.node_ids.iter().zip(&eval.weights).zip(grads) {
                let q = (T::one() + set.point(a).distance_squared(x) / (h * h)).powf(s);
                m = m.max(q * w.abs()).max(q * h * g.max_abs());
            }
            Some(m.as_f64())
        })
        .collect();
    let failed = per_probe.iter().filter(|v| v.is_none()).count();
    let c = per_probe.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    (c, failed)
}

/// Decay constants across the levels of `sweep`; passes when every level
/// stays within [`DECAY_UNIFORMITY`] of the coarsest.
pub fn decay_sweep<T: Real>(sweep: &Sweep<T>, s: T) -> Result<DecayReport, DiagnosticsError> {
    let mut per_h = Vec::new();
    let mut failed_probes = 0;
    for level in sweep.levels()? {
        let mut c = 0.0f64;
        for set in &level.sets {
            let (ci, failed) = decay_constant(set, &level.params, s, &level.probes);
            c = c.max(ci);
            failed_probes += failed;
        }
        per_h.push((level.h.as_f64(), c));
    }
    let values: Vec<f64> = per_h.iter().map(|p| p.1).collect();
    let ratios = ratios_to_first(&values);
    let measured_c = values.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(DecayReport {
        s: s.as_f64(),
        measured_c,
        pass: failed_probes == 0 && measured_c.is_finite() && within_factor(&ratios, DECAY_UNIFORMITY),
        per_h,
        ratios,
        uniformity_factor: DECAY_UNIFORMITY,
        failed_probes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub theta: f64,
    /// Largest value over all levels.
    pub c_theta: usize,
    /// `(h, c_theta)` per level.
    pub per_h: Vec<(f64, usize)>,
    pub failed_probes: usize,
    pub pass: bool,
}

impl ConcentrationReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport::new(
            "concentration",
            json!({ "theta": self.theta, "allowed_spread": 1 }),
            json!({ "c_theta": self.c_theta, "per_h": self.per_h, "failed_probes": self.failed_probes }),
            self.pass,
        )
    }
}

/// Smallest integer `c >= 1` such that the weights of nodes farther than
/// `c·h` from the probe sum to at most `theta`, maximised over probes.
pub fn check_concentration<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, theta: T, probes: &[Point<T>]) -> ConcentrationReport {
    let (c, failed) = concentration_constant(set, params, theta, probes);
    ConcentrationReport {
        theta: theta.as_f64(),
        c_theta: c,
        per_h: vec![(params.h.as_f64(), c)],
        failed_probes: failed,
        pass: failed == 0,
    }
}

fn concentration_constant<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, theta: T, probes: &[Point<T>]) -> (usize, usize) {
    let h = params.h.as_f64();
    let theta = theta.as_f64();
    let per_probe: Vec<Option<usize>> = probes
        .par_iter()
        .map(|x| {
            let eval = shape_values(x, set, params).ok()?;
            let mut tail: Vec<(f64, f64)> = eval
                .node_ids
                .iter()
                .zip(&eval.weights)
                .map(|(&a, &w)| (set.point(a).distance(x).as_f64() / h, w.as_f64().abs()))
                .collect();
            tail.sort_by(|p, q| p.0.total_cmp(&q.0));
            let mut c = 1usize;
            loop {
                let limit = c as f64 * (1.0 + 1e-9);
                let mass: f64 = tail.iter().rev().take_while(|(d, _)| *d > limit).map(|(_, w)| w).sum();
                if mass <= theta {
                    return Some(c);
                }
                c += 1;
            }
        })
        .collect();
    let failed = per_probe.iter().filter(|v| v.is_none()).count();
    (per_probe.iter().flatten().copied().max().unwrap_or(0), failed)
}

/// Concentration constants across the levels of `sweep`; passes when they
/// differ by at most one ring.
pub fn concentration_sweep<T: Real>(sweep: &Sweep<T>, theta: T) -> Result<ConcentrationReport, DiagnosticsError> {
    let mut per_h = Vec::new();
    let mut failed_probes = 0;
    for level in sweep.levels()? {
        let mut c = 0;
        for set in &level.sets {
            let (ci, failed) = concentration_constant(set, &level.params, theta, &level.probes);
            c = c.max(ci);
            failed_probes += failed;
        }
        per_h.push((level.h.as_f64(), c));
    }
    let lo = per_h.iter().map(|p| p.1).min().unwrap_or(0);
    let hi = per_h.iter().map(|p| p.1).max().unwrap_or(0);
    Ok(ConcentrationReport { theta: theta.as_f64(), c_theta: hi, per_h, failed_probes, pass: failed_probes == 0 && hi - lo <= 1 })
}
