use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::geometry::{affine_rank, Point, PointSet};
use crate::linalg::Vector;
use crate::maxent::{shape_gradients, shape_values, LmeParams, ShapeEval};
use crate::scalar::Real;

use super::CheckReport;

/// Tolerances for the four identities. The moment tolerance is relative to
/// `h`, the gradient-sum tolerance is divided by `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConsistencyTolerances {
    pub partition: f64,
    pub moment_per_h: f64,
    pub grad_sum_times_h: f64,
    pub grad_moment: f64,
}

impl Default for ConsistencyTolerances {
    fn default() -> Self {
        Self { partition: 1e-12, moment_per_h: 1e-10, grad_sum_times_h: 1e-8, grad_moment: 1e-8 }
    }
}

/// Hook applied to every evaluation before the identities are checked.
/// Used to confirm the suite detects corrupted weights.
pub type WeightFault<'a, T> = &'a (dyn Fn(&mut ShapeEval<T>) + Sync);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub pass: bool,
    pub h: f64,
    pub n_probes: usize,
    /// `|Σ w_a - 1|`.
    pub worst_partition: f64,
    /// `|Σ w_a (x_a - x)| / h`.
    pub worst_moment: f64,
    /// `|Σ ∇w_a| · h`.
    pub worst_grad_sum: f64,
    /// `max_ij |Σ ∂_j w_a (x_a - x)_i - δ_ij|`.
    pub worst_grad_moment: f64,
    /// Probes whose active nodes span fewer than `d` dimensions; only the
    /// partition of unity is checked there.
    pub degenerate_probes: usize,
    /// Probes where the dual solve failed.
    pub failed_probes: usize,
    pub worst_probe: Option<Vec<f64>>,
    pub tolerances: ConsistencyTolerances,
}

impl ConsistencyReport {
    pub fn to_check(&self) -> CheckReport {
        CheckReport::new(
            "consistency",
            json!({ "h": self.h, "n_probes": self.n_probes, "tolerances": self.tolerances }),
            json!({
                "worst_partition": self.worst_partition,
                "worst_moment_per_h": self.worst_moment,
                "worst_grad_sum_times_h": self.worst_grad_sum,
                "worst_grad_moment": self.worst_grad_moment,
                "degenerate_probes": self.degenerate_probes,
                "failed_probes": self.failed_probes,
            }),
            self.pass,
        )
    }
}

#[derive(Default, Clone, Copy)]
struct Residuals {
    partition: f64,
    moment: f64,
    grad_sum: f64,
    grad_moment: f64,
    degenerate: bool,
}

/// Checks the zeroth and first order consistency identities and their
/// derivatives at every probe.
pub fn check_consistency_suite<T: Real>(set: &PointSet<T>, params: &LmeParams<T>, probes: &[Point<T>]) -> ConsistencyReport {
    check_consistency_suite_with(set, params, probes, ConsistencyTolerances::default(), None)
}

pub fn check_consistency_suite_with<T: Real>(
    set: &PointSet<T>,
    params: &LmeParams<T>,
    probes: &[Point<T>],
    tol: ConsistencyTolerances,
    fault: Option<WeightFault<'_, T>>,
) -> ConsistencyReport {
    let h = params.h.as_f64();
    let rows: Vec<Option<Residuals>> = probes.par_iter().map(|x| probe_residuals(set, params, x, fault)).collect();

    let mut worst = Residuals::default();
    let mut worst_probe = None;
    let mut worst_score = -1.0;
    let mut degenerate_probes = 0;
    let mut failed_probes = 0;
    for (x, row) in probes.iter().zip(&rows) {
        let Some(r) = row else {
            failed_probes += 1;
            continue;
        };
        degenerate_probes += r.degenerate as usize;
        worst.partition = worst.partition.max(r.partition);
        worst.moment = worst.moment.max(r.moment);
        worst.grad_sum = worst.grad_sum.max(r.grad_sum);
        worst.grad_moment = worst.grad_moment.max(r.grad_moment);
        let score = (r.partition / tol.partition)
            .max(r.moment / tol.moment_per_h)
            .max(r.grad_sum / tol.grad_sum_times_h)
            .max(r.grad_moment / tol.grad_moment);
        if score > worst_score {
            worst_score = score;
            worst_probe = Some(x.to_f64_vec());
        }
    }
    let pass = failed_probes == 0
        && worst.partition <= tol.partition
        && worst.moment <= tol.moment_per_h
        && worst.grad_sum <= tol.grad_sum_times_h
        && worst.grad_moment <= tol.grad_moment;
    ConsistencyReport {
        pass,
        h,
        n_probes: probes.len(),
        worst_partition: worst.partition,
        worst_moment: worst.moment,
        worst_grad_sum: worst.grad_sum,
        worst_grad_moment: worst.grad_moment,
        degenerate_probes,
        failed_probes,
        worst_probe,
        tolerances: tol,
    }
}

fn probe_residuals<T: Real>(
    set: &PointSet<T>,
    params: &LmeParams<T>,
    x: &Point<T>,
    fault: Option<WeightFault<'_, T>>,
) -> Option<Residuals> {
    let h = params.h.as_f64();
    let dim = x.dim();
    let values = shape_values(x, set, params).ok()?;
    let active: Vec<Point<T>> = values.node_ids.iter().map(|&a| *set.point(a)).collect();
    let degenerate = affine_rank(&active) < dim;
    let mut eval = if degenerate { values } else { shape_gradients(x, set, params).ok()? };
    if let Some(f) = fault {
        f(&mut eval);
    }

    let mut sum_w = 0.0;
    let mut moment = vec![0.0; dim];
    for (&a, &w) in eval.node_ids.iter().zip(&eval.weights) {
        let w = w.as_f64();
        sum_w += w;
        let d = (*set.point(a) - *x).to_f64_vec();
        for i in 0..dim {
            moment[i] += w * d[i];
        }
    }
    let mut r = Residuals { partition: (sum_w - 1.0).abs(), degenerate, ..Default::default() };
    if degenerate {
        return Some(r);
    }
    r.moment = moment.iter().map(|m| m * m).sum::<f64>().sqrt() / h;

    let grads = eval.gradients.as_ref()?;
    let mut gsum = vec![0.0; dim];
    let mut gm = vec![vec![0.0; dim]; dim];
    for (&a, g) in eval.node_ids.iter().zip(grads) {
        let d = (*set.point(a) - *x).to_f64_vec();
        let g: Vec<f64> = g.to_f64_vec();
        for j in 0..dim {
            gsum[j] += g[j];
            for i in 0..dim {
                gm[i][j] += g[j] * d[i];
            }
        }
    }
    r.grad_sum = gsum.iter().map(|v| v * v).sum::<f64>().sqrt() * h;
    for i in 0..dim {
        for j in 0..dim {
            let delta = if i == j { 1.0 } else { 0.0 };
            r.grad_moment = r.grad_moment.max((gm[i][j] - delta).abs());
        }
    }
    Some(r)
}

/// Scales every weight by `1 + eps` (and leaves gradients alone).
pub fn scale_weights_fault<T: Real>(eps: T) -> impl Fn(&mut ShapeEval<T>) + Sync {
    move |e: &mut ShapeEval<T>| {
        for w in e.weights.iter_mut() {
            *w = *w * (T::one() + eps);
        }
        if let Some(g) = e.gradients.as_mut() {
            if let Some(first) = g.first_mut() {
                *first = *first + Vector::from_fn(first.dim(), |_| eps);
            }
        }
    }
}
