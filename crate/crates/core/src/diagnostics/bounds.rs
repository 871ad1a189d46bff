use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::geometry::{Point, PointSet};
use crate::linalg::Vector;
use crate::maxent::{log_partition, shape_gradients, LmeParams};
use crate::scalar::Real;

use super::{ratios_to_first, within_factor, CheckReport, DiagnosticsError, Sweep};

/// Allowed spread of each normalised bound across an h-sweep.
pub const BOUND_UNIFORMITY: f64 = 2.0;

/// `λ*` for the two-node set `{a, a + h}` at `a < x < a + h`:
///
/// ```text
/// λ* = [log(a + h - x) - log(x - a)] / h + (γ / h²)(2x - 2a - h)
/// ```
pub fn closed_form_lambda_1d(x: f64, a: f64, h: f64, gamma: f64) -> Result<f64, DiagnosticsError> {
    if !(h > 0.0) || !(x > a && x < a + h) {
        return Err(DiagnosticsError::OutsideInterval { x, a, h });
    }
    Ok(((a + h - x).ln() - (x - a).ln()) / h + gamma / (h * h) * (2.0 * x - 2.0 * a - h))
}

/// Raw bound measurements at one refinement level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualBoundsMeasure {
    pub h: f64,
    pub epsilon: f64,
    /// `sup |λ*| · min(ε, 1) · h`.
    pub lambda: f64,
    /// `min Z(x, λ*)`.
    pub z_low: f64,
    /// `max Z(x, λ*)`.
    pub z_high: f64,
    /// `sup ‖J*⁻¹‖ · h²` (spectral norm).
    pub jinv: f64,
    /// `max Z(x, 0)`.
    pub c_z: f64,
    /// Every probe has `Z(x, λ*) <= Z(x, 0)`.
    pub z_below_c_z: bool,
    pub failed_probes: usize,
}

impl DualBoundsMeasure {
    /// Merges measurements of replicated node sets at the same `h`.
    pub fn combine(parts: &[DualBoundsMeasure]) -> Option<DualBoundsMeasure> {
        let (first, rest) = parts.split_first()?;
        let mut m = first.clone();
        for p in rest {
            m.lambda = m.lambda.max(p.lambda);
            m.z_low = m.z_low.min(p.z_low);
            m.z_high = m.z_high.max(p.z_high);
            m.jinv = m.jinv.max(p.jinv);
            m.c_z = m.c_z.max(p.c_z);
            m.z_below_c_z &= p.z_below_c_z;
            m.failed_probes += p.failed_probes;
        }
        Some(m)
    }
}

/// Bounds at every probe of one node set. Probes should keep their
/// `ε h`-ball inside the hull.
pub fn check_dual_bounds<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, epsilon: T, probes: &[Point<T>]) -> DualBoundsMeasure {
    let h = params.h.as_f64();
    let eps = epsilon.as_f64();
    let rows: Vec<Option<[f64; 4]>> = probes
        .par_iter()
        .map(|x| {
            let eval = shape_gradients(x, set, params).ok()?;
            let j_star = eval.j_star?;
            let lam = eval.dual.lambda_star.norm().as_f64();
            let log_z = eval.dual.log_z.as_f64();
            let log_z0 = log_partition(x, &Vector::zeros(x.dim()), set, params).ok()?.log_z.as_f64();
            let jinv = 1.0 / j_star.min_eigenvalue().as_f64();
            Some([lam, log_z, log_z0, jinv])
        })
        .collect();
    let mut m = DualBoundsMeasure {
        h,
        epsilon: eps,
        lambda: 0.0,
        z_low: f64::INFINITY,
        z_high: 0.0,
        jinv: 0.0,
        c_z: 0.0,
        z_below_c_z: true,
        failed_probes: 0,
    };
    for row in &rows {
        let Some([lam, log_z, log_z0, jinv]) = *row else {
            m.failed_probes += 1;
            continue;
        };
        m.lambda = m.lambda.max(lam * eps.min(1.0) * h);
        m.z_low = m.z_low.min(log_z.exp());
        m.z_high = m.z_high.max(log_z.exp());
        m.jinv = m.jinv.max(jinv * h * h);
        m.c_z = m.c_z.max(log_z0.exp());
        // allow a few ulps: at symmetric probes λ* = 0 and both sides agree
        m.z_below_c_z &= log_z <= log_z0 + 1e-12 * log_z0.abs().max(1.0);
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Lambda,
    ZLow,
    ZHigh,
    Jinv,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    /// Raw measured values per level.
    pub measured: Vec<f64>,
    /// Predicted scale per level: `1/(min(ε,1) h)` for λ, `1` for Z and
    /// `h⁻²` for `‖J*⁻¹‖`.
    pub normalization: Vec<f64>,
    pub h: Vec<f64>,
    pub ratios: Vec<f64>,
    pub pass: bool,
}

impl BoundReport {
    pub fn to_check(&self) -> CheckReport {
        let name = match self.kind {
            BoundKind::Lambda => "dual_bound_lambda",
            BoundKind::ZLow => "dual_bound_z_low",
            BoundKind::ZHigh => "dual_bound_z_high",
            BoundKind::Jinv => "dual_bound_jinv",
        };
        CheckReport::new(
            name,
            json!({ "h": self.h, "uniformity_factor": BOUND_UNIFORMITY }),
            json!({ "measured": self.measured, "normalization": self.normalization, "ratios": self.ratios }),
            self.pass,
        )
    }
}

/// Dual bounds over every level of `sweep`, one report per bound kind.
/// Each normalised measure must stay within [`BOUND_UNIFORMITY`] of its
/// coarsest-level value; additionally `Z(λ*) <= Z(0)` at every probe.
pub fn dual_bounds_sweep<T: Real>(sweep: &Sweep<T>) -> Result<(Vec<BoundReport>, Vec<DualBoundsMeasure>), DiagnosticsError> {
    let mut measures = Vec::new();
    for level in sweep.levels()? {
        let per_set: Vec<DualBoundsMeasure> =
            level.sets.iter().map(|set| check_dual_bounds(set, &level.params, sweep.epsilon, &level.probes)).collect();
        measures.push(DualBoundsMeasure::combine(&per_set).expect("at least one set per level"));
    }
    let eps_floor = sweep.epsilon.as_f64().min(1.0);
    let hs: Vec<f64> = measures.iter().map(|m| m.h).collect();
    let healthy = measures.iter().all(|m| m.failed_probes == 0 && m.z_below_c_z);
    let mk = |kind: BoundKind, raw: &dyn Fn(&DualBoundsMeasure) -> f64, norm: &dyn Fn(f64) -> f64| {
        let normalized: Vec<f64> = measures.iter().map(raw).collect();
        let normalization: Vec<f64> = hs.iter().map(|&h| norm(h)).collect();
        let measured: Vec<f64> = normalized.iter().zip(&normalization).map(|(v, n)| v * n).collect();
        let ratios = ratios_to_first(&normalized);
        let finite = normalized.iter().all(|v| v.is_finite() && *v > 0.0);
        BoundReport { kind, measured, normalization, h: hs.clone(), pass: healthy && finite && within_factor(&ratios, BOUND_UNIFORMITY), ratios }
    };
    let reports = vec![
        mk(BoundKind::Lambda, &|m| m.lambda, &|h| 1.0 / (eps_floor * h)),
        mk(BoundKind::ZLow, &|m| m.z_low, &|_| 1.0),
        mk(BoundKind::ZHigh, &|m| m.z_high, &|_| 1.0),
        mk(BoundKind::Jinv, &|m| m.jinv, &|h| 1.0 / (h * h)),
    ];
    Ok((reports, measures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn closed_form_examples() {
        assert!(closed_form_lambda_1d(0.5, 0.0, 1.0, 1.8).unwrap().abs() < 1e-15);
        let near = closed_form_lambda_1d(1e-9, 0.0, 1.0, 1.8).unwrap();
        let nearer = closed_form_lambda_1d(1e-12, 0.0, 1.0, 1.8).unwrap();
        assert!(nearer > near && near > 15.0);
        assert!(closed_form_lambda_1d(0.0, 0.0, 1.0, 1.8).is_err());
        assert!(closed_form_lambda_1d(1.0, 0.0, 1.0, 1.8).is_err());
    }

    #[test]
    fn midpoint_lambda_vanishes() {
        let set = PointSet::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![0.3]]).unwrap();
        let params = LmeParams::new(1.8, 0.1).unwrap();
        let m = check_dual_bounds(&set, &params, 1.0, &[Point::from_slice(&[0.15])]);
        assert!(m.lambda < 1e-10, "{m:?}");
        assert!(m.z_below_c_z);
    }

    #[test]
    fn uniform_grid_sweep_is_uniform() {
        // side sqrt(2): the lattice spacing h/sqrt(2) divides it at every level,
        // so the levels are exact rescalings of each other
        let side = 2f64.sqrt();
        let sw = Sweep::new(Domain::new_box(&[0.0, 0.0], &[side, side]).unwrap(), vec![0.2, 0.1, 0.05], 1.8, 2.0);
        let (reports, measures) = dual_bounds_sweep(&sw).unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}\n{measures:?}");
        }
    }
}
