use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::geometry::{eta_gap_holds, Domain, Point, PointSet};
use crate::interpolation::fit_rate;
use crate::linalg::{Matrix, Vector};
use crate::maxent::{shape_gradients, LmeParams};
use crate::scalar::Real;

use super::{CheckReport, DiagnosticsError};

/// Smallest admissible probe distance, in units of `h`.
pub const RHO_FLOOR: f64 = 1e-6;
/// Exponent used for the off-diagonal and gradient blow-up bounds.
pub const MU: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryOptions {
    /// Offset of the probe line from the face centroid along a tangent, in
    /// units of `h`, so the line avoids mirror-symmetric positions.
    pub tangential_offset: f64,
    /// Required distance of the probe line from the other faces, in units
    /// of `h`.
    pub delta: f64,
    /// Node gap: no node may lie strictly between `0` and `eta·h` from the
    /// boundary.
    pub eta: f64,
    /// Polynomial weight exponent in the gradient blow-up measure.
    pub s: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self { tangential_offset: 0.3, delta: 1.0, eta: 0.25, s: 2.0 }
    }
}

/// `n` distances from `0.5 h` down to `1e-3 h`, geometrically spaced.
pub fn default_rho_list(h: f64, n: usize) -> Vec<f64> {
    let (hi, lo) = (0.5 * h, 1e-3 * h);
    let n = n.max(2);
    (0..n).map(|k| hi * (lo / hi).powf(k as f64 / (n - 1) as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcludedRho {
    pub rho: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryChecks {
    pub j11_slope: bool,
    pub rho_lambda1_vanishes: bool,
    pub lambda1_increasing: bool,
    pub b_bounded_below: bool,
    pub j11_over_rho_bounded_below: bool,
    pub j1j_over_rho_mu_bounded: bool,
    pub grad_blowup_bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryProbeReport {
    pub face: usize,
    pub h: f64,
    pub gamma: f64,
    /// Outward unit normal of the face.
    pub normal: Vec<f64>,
    /// Point on the face the probe line starts from.
    pub base_point: Vec<f64>,
    /// Householder reflection taking the inward normal to the first axis.
    pub rotation: Vec<Vec<f64>>,
    /// Converged distances, strictly decreasing.
    pub rho_list: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub rho_lambda1: Vec<f64>,
    /// `max_{j>=2} |λ*_j|` in face coordinates.
    pub lambda_tangential: Vec<f64>,
    pub j11: Vec<f64>,
    pub j1j_max: Vec<f64>,
    pub b_min_eig: Vec<f64>,
    pub j11_over_rho: Vec<f64>,
    pub j1j_over_rho_mu: Vec<f64>,
    /// `max_a h |∇w_a| (ρ/h)^μ (1 + |x - x_a|²/h²)^s`.
    pub grad_blowup: Vec<f64>,
    pub j11_vs_rho: Option<f64>,
    pub j1j_vs_rho: Option<f64>,
    pub excluded: Vec<ExcludedRho>,
    pub smallest_converged_rho: Option<f64>,
    pub checks: BoundaryChecks,
    pub pass: bool,
}

impl BoundaryProbeReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport::new(
            "boundary_scaling",
            json!({ "face": self.face, "h": self.h, "gamma": self.gamma, "mu": MU, "rotation": self.rotation }),
            json!({
                "j11_vs_rho": self.j11_vs_rho,
                "j1j_vs_rho": self.j1j_vs_rho,
                "final_rho_lambda1": self.rho_lambda1.last(),
                "min_b_eig": self.b_min_eig.iter().copied().fold(f64::INFINITY, f64::min),
                "smallest_converged_rho": self.smallest_converged_rho,
                "excluded": self.excluded.len(),
                "checks": self.checks,
            }),
            self.pass,
        )
    }
}

struct Row {
    rho: f64,
    lambda1: f64,
    lambda_t: f64,
    j11: f64,
    j1j: f64,
    b_min: f64,
    blowup: f64,
}

/// Solves the dual along a line approaching `face` and records the
/// boundary-layer quantities in coordinates where the inward normal is the
/// first axis.
pub fn boundary_scaling_probe<T: Real>(
    domain: &Domain<T>,
    face: usize,
    set: &PointSet<T>,
    params: &LmeParams<T>,
    rho_list: &[T],
    opts: &BoundaryOptions,
) -> Result<BoundaryProbeReport, DiagnosticsError> {
    params.validate()?;
    let dim = domain.dim();
    let faces = domain.faces();
    let hs = faces
        .get(face)
        .ok_or_else(|| DiagnosticsError::InvalidProbe(format!("face {face} out of range (domain has {})", faces.len())))?;
    let h = params.h;
    let hf = h.as_f64();
    if rho_list.len() < 3 {
        return Err(DiagnosticsError::InvalidProbe("need at least 3 distances".into()));
    }
    if rho_list.windows(2).any(|w| !(w[1] < w[0])) || !(rho_list[rho_list.len() - 1] > T::zero()) {
        return Err(DiagnosticsError::InvalidProbe("distances must be positive and strictly decreasing".into()));
    }
    if !eta_gap_holds(set, domain, T::lit(opts.eta), h) {
        return Err(DiagnosticsError::EtaGapViolated { eta: opts.eta });
    }

    let inward = -hs.normal;
    let q = Matrix::householder_to_first_axis(&inward);
    let verts = domain.face_vertices(face);
    let mut base = Vector::zeros(dim);
    for v in &verts {
        base += *v;
    }
    base = base.scale(T::one() / T::from_usize_lossy(verts.len().max(1)));
    if dim >= 2 {
        let tangent = q.mul_vec(&Vector::unit(dim, 1));
        base += tangent.scale(T::lit(opts.tangential_offset) * h);
    }
    let clearance = faces
        .iter()
        .enumerate()
        .filter(|(g, _)| *g != face)
        .map(|(_, g)| g.inside_distance(&base))
        .fold(T::infinity(), |m, d| m.min(d));
    if clearance < T::lit(opts.delta) * h {
        return Err(DiagnosticsError::InvalidProbe(format!(
            "probe line is {:.3e}·h from the face edges, need {}·h",
            (clearance / h).as_f64(),
            opts.delta
        )));
    }

    let mut excluded = Vec::new();
    let mut candidates = Vec::new();
    for &rho in rho_list {
        if rho.as_f64() < RHO_FLOOR * hf {
            excluded.push(ExcludedRho { rho: rho.as_f64(), reason: format!("below floor {RHO_FLOOR}·h") });
        } else {
            candidates.push(rho);
        }
    }
    let results: Vec<Result<Row, String>> = candidates
        .par_iter()
        .map(|&rho| probe_row(&(base + inward.scale(rho)), rho, set, params, &q, opts).map_err(|e| e.to_string()))
        .collect();
    let mut rows = Vec::new();
    for (rho, r) in candidates.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(reason) => excluded.push(ExcludedRho { rho: rho.as_f64(), reason }),
        }
    }

    let col = |f: fn(&Row) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let rho: Vec<f64> = col(|r| r.rho);
    let lambda1 = col(|r| r.lambda1);
    let rho_lambda1: Vec<f64> = rows.iter().map(|r| r.rho * r.lambda1).collect();
    let j11 = col(|r| r.j11);
    let j1j = col(|r| r.j1j);
    let b_min_eig = col(|r| r.b_min);
    let j11_over_rho: Vec<f64> = rows.iter().map(|r| r.j11 / r.rho).collect();
    let j1j_over_rho_mu: Vec<f64> = rows.iter().map(|r| r.j1j * r.rho.powf(-MU)).collect();
    let grad_blowup = col(|r| r.blowup);

    let pairs = |ys: &[f64]| -> Vec<(f64, f64)> { rho.iter().copied().zip(ys.iter().copied()).collect() };
    let j11_vs_rho = fit_rate(&pairs(&j11));
    let j1j_vs_rho = if dim >= 2 { fit_rate(&pairs(&j1j)) } else { None };

    let enough = rows.len() >= 3;
    let head_max = |v: &[f64]| v.iter().take(3).copied().fold(0.0f64, f64::max);
    let checks = BoundaryChecks {
        j11_slope: j11_vs_rho.is_some_and(|s| (0.8..=1.2).contains(&s)),
        rho_lambda1_vanishes: enough && decreasing_after_peak(&rho_lambda1) && *rho_lambda1.last().unwrap() < 0.1,
        lambda1_increasing: enough && lambda1.windows(2).all(|w| w[1] > w[0]),
        b_bounded_below: dim < 2 || (enough && bounded_below(&b_min_eig)),
        j11_over_rho_bounded_below: enough && bounded_below(&j11_over_rho),
        j1j_over_rho_mu_bounded: dim < 2
            || (enough && j1j_over_rho_mu.iter().all(|v| v.is_finite() && *v <= 2.0 * head_max(&j1j_over_rho_mu))),
        grad_blowup_bounded: enough && grad_blowup.iter().all(|v| v.is_finite() && *v <= 2.0 * head_max(&grad_blowup)),
    };
    let pass = checks.j11_slope
        && checks.rho_lambda1_vanishes
        && checks.lambda1_increasing
        && checks.b_bounded_below
        && checks.j11_over_rho_bounded_below
        && checks.j1j_over_rho_mu_bounded
        && checks.grad_blowup_bounded;

    Ok(BoundaryProbeReport {
        face,
        h: hf,
        gamma: params.gamma.as_f64(),
        normal: hs.normal.to_f64_vec(),
        base_point: base.to_f64_vec(),
        rotation: q.to_f64_rows(),
        smallest_converged_rho: rho.last().copied(),
        rho_list: rho,
        lambda1,
        rho_lambda1,
        lambda_tangential: col(|r| r.lambda_t),
        j11,
        j1j_max: j1j,
        b_min_eig,
        j11_over_rho,
        j1j_over_rho_mu,
        grad_blowup,
        j11_vs_rho,
        j1j_vs_rho,
        excluded,
        checks,
        pass,
    })
}

fn probe_row<T: Real>(
    x: &Point<T>,
    rho: T,
    set: &PointSet<T>,
    params: &LmeParams<T>,
    q: &Matrix<T>,
    opts: &BoundaryOptions,
) -> Result<Row, DiagnosticsError> {
    let eval = shape_gradients(x, set, params)?;
    let dim = x.dim();
    let h = params.h;
    let lam = q.mul_vec(&eval.dual.lambda_star);
    let j = q.mul_mat(&eval.j_star.expect("gradients computed")).mul_mat(q);
    let b_min = j.trailing_block().map(|b| b.min_eigenvalue().as_f64()).unwrap_or(f64::NAN);
    let rho_h = (rho / h).powf(T::lit(MU));
    let s = T::lit(opts.s);
    let grads = eval.gradients.as_ref().expect("gradients computed");
    let mut blowup = T::zero();
    for (&a, g) in eval.node_ids.iter().zip(grads) {
        let q = (T::one() + set.point(a).distance_squared(x) / (h * h)).powf(s);
        blowup = blowup.max(h * g.norm() * rho_h * q);
    }
    Ok(Row {
        rho: rho.as_f64(),
        lambda1: lam[0].as_f64(),
        lambda_t: (1..dim).map(|k| lam[k].abs().as_f64()).fold(0.0, f64::max),
        j11: j.get(0, 0).as_f64(),
        j1j: (1..dim).map(|k| j.get(0, k).abs().as_f64()).fold(0.0, f64::max),
        b_min,
        blowup: blowup.as_f64(),
    })
}

/// Non-increasing from the maximum onwards.
fn decreasing_after_peak(v: &[f64]) -> bool {
    let Some(peak) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i) else {
        return false;
    };
    v[peak..].windows(2).all(|w| w[1] <= w[0])
}

/// Positive, and no entry below a quarter of the value at the smallest
/// distance (the limit the sequence settles to).
fn bounded_below(v: &[f64]) -> bool {
    let Some(&last) = v.last() else { return false };
    last > 0.0 && v.iter().all(|x| x.is_finite() && *x >= 0.25 * last)
}

/// Probes close to the vertices and face centroids of `domain`.
pub fn default_corner_probes<T: Real>(domain: &Domain<T>, h: T) -> Vec<Point<T>> {
    let dim = domain.dim();
    let verts = domain.vertices();
    let mut c = Vector::zeros(dim);
    for v in &verts {
        c += *v;
    }
    c = c.scale(T::one() / T::from_usize_lossy(verts.len().max(1)));
    let mut out = Vec::new();
    for v in &verts {
        let u = (c - *v).scale(T::one() / (c - *v).norm());
        for t in [0.1, 0.25, 0.5, 1.0] {
            out.push(*v + u.scale(T::lit(t) * h));
        }
    }
    for (f, hs) in domain.faces().iter().enumerate() {
        let fv = domain.face_vertices(f);
        let mut m = Vector::zeros(dim);
        for v in &fv {
            m += *v;
        }
        m = m.scale(T::one() / T::from_usize_lossy(fv.len().max(1)));
        for t in [0.1, 0.5] {
            out.push(m - hs.normal.scale(T::lit(t) * h));
        }
    }
    out
}

/// `sup_{x, a} (1 + |x - x_a|²/h²)^s · h · |∇w*_a(x)|` over probes `x` and
/// nodes with `dist(x_a, ∂Ω) >= R h`. Zero when no node qualifies.
pub fn far_node_gradient_check<T: Real>(
    domain: &Domain<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
    r: T,
    s: T,
    probes: &[Point<T>],
) -> Result<f64, DiagnosticsError> {
    let h = params.h;
    let values: Vec<Result<f64, DiagnosticsError>> = probes
        .par_iter()
        .map(|x| {
            let eval = shape_gradients(x, set, params)?;
            let grads = eval.gradients.as_ref().expect("gradients computed");
            let mut m = T::zero();
            for (&a, g) in eval.node_ids.iter().zip(grads) {
                let xa = set.point(a);
                if domain.distance_to_boundary(xa) >= r * h {
                    let q = (T::one() + xa.distance_squared(x) / (h * h)).powf(s);
                    m = m.max(q * h * g.norm());
                }
            }
            Ok(m.as_f64())
        })
        .collect();
    let mut sup = 0.0f64;
    for v in values {
        sup = sup.max(v?);
    }
    Ok(sup)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FarNodeReport {
    pub h: f64,
    pub s: f64,
    pub r_list: Vec<f64>,
    pub values: Vec<f64>,
    /// Smallest `R` in the list from which every value is at most 1.
    pub r0: Option<f64>,
    pub monotone: bool,
    pub pass: bool,
}

impl FarNodeReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport::new(
            "far_node_gradient",
            json!({ "h": self.h, "s": self.s, "r_list": self.r_list }),
            json!({ "values": self.values, "r0": self.r0, "monotone": self.monotone }),
            self.pass,
        )
    }
}

/// Far-node gradient values over an increasing list of `R`.
pub fn far_node_sweep<T: Real>(
    domain: &Domain<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
    s: T,
    r_list: &[T],
    probes: &[Point<T>],
) -> Result<FarNodeReport, DiagnosticsError> {
    if r_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DiagnosticsError::InvalidParameter("R values must be strictly increasing".into()));
    }
    let mut values = Vec::with_capacity(r_list.len());
    for &r in r_list {
        values.push(far_node_gradient_check(domain, set, params, r, s, probes)?);
    }
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    let mut r0 = None;
    for k in (0..values.len()).rev() {
        if values[k] <= 1.0 {
            r0 = Some(r_list[k].as_f64());
        } else {
            break;
        }
    }
    Ok(FarNodeReport {
        h: params.h.as_f64(),
        s: s.as_f64(),
        r_list: r_list.iter().map(|r| r.as_f64()).collect(),
        values,
        r0,
        monotone,
        pass: monotone && r0.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_grid_points;

    fn square(h: f64) -> (Domain<f64>, PointSet<f64>, LmeParams<f64>) {
        let dom = Domain::unit_box(2).unwrap();
        let set = generate_grid_points(&dom, h, 0.0, 0).unwrap();
        (dom, set, LmeParams::new(1.8, h).unwrap())
    }

    #[test]
    fn square_face_scalings() {
        let (dom, set, params) = square(0.1);
        let rhos = default_rho_list(0.1, 12);
        let rep = boundary_scaling_probe(&dom, 0, &set, &params, &rhos, &BoundaryOptions::default()).unwrap();
        assert!(rep.pass, "{}", serde_json::to_string_pretty(&rep).unwrap());
        assert!(rep.excluded.is_empty());
        assert_eq!(rep.rotation.len(), 2);
    }

    #[test]
    fn jittered_square_has_coupling() {
        // tensor lattices give J*_1j = 0 exactly; jitter breaks the product structure
        let dom = Domain::unit_box(2).unwrap();
        let set = generate_grid_points(&dom, 0.1, 0.2, 5).unwrap();
        let params = LmeParams::new(1.8, 0.1).unwrap();
        let rep = boundary_scaling_probe(&dom, 0, &set, &params, &default_rho_list(0.1, 12), &BoundaryOptions::default()).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
        assert!(rep.j1j_max.iter().any(|v| *v > 1e-8));
    }

    #[test]
    fn floor_and_bad_faces() {
        let (dom, set, params) = square(0.1);
        let rep = boundary_scaling_probe(&dom, 0, &set, &params, &[0.05, 0.01, 0.001, 1e-8], &BoundaryOptions::default()).unwrap();
        assert_eq!(rep.excluded.len(), 1);
        assert_eq!(rep.smallest_converged_rho, Some(0.001));
        assert!(boundary_scaling_probe(&dom, 9, &set, &params, &[0.05, 0.01, 0.001], &BoundaryOptions::default()).is_err());
        let bad = PointSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.01, 0.5]]).unwrap();
        assert!(matches!(
            boundary_scaling_probe(&dom, 0, &bad, &params, &[0.05, 0.01, 0.001], &BoundaryOptions::default()),
            Err(DiagnosticsError::EtaGapViolated { .. })
        ));
    }

    #[test]
    fn far_node_sweep_on_square() {
        let (dom, set, params) = square(0.1);
        let probes = default_corner_probes(&dom, 0.1);
        let inf = far_node_gradient_check(&dom, &set, &params, f64::INFINITY, 2.0, &probes).unwrap();
        assert_eq!(inf, 0.0);
        let rs: Vec<f64> = (0..=12).map(|k| 0.5 * k as f64).collect();
        let rep = far_node_sweep(&dom, &set, &params, 2.0, &rs, &probes).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn rho_list_shape() {
        let r = default_rho_list(0.1, 12);
        assert_eq!(r.len(), 12);
        assert!((r[0] - 0.05).abs() < 1e-15 && (r[11] - 1e-4).abs() < 1e-15);
    }
}
