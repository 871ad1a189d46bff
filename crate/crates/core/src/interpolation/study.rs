use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{generate_grid_points, lattice_probes, Domain, Point};
use crate::maxent::LmeParams;
use crate::scalar::Real;

use super::{interpolate_with_gradient, InterpolationError, ScalarField};

/// Least-squares slope of `log err` against `log h`.
///
/// Pairs with `err <= 0` (or non-finite entries) are dropped; fewer than two
/// surviving pairs, or a single distinct `h`, leave the rate undefined.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * n {
        return None;
    }
    Some(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub h: f64,
    pub sup_err_value: f64,
    pub sup_err_grad: f64,
    /// Probes that entered the sup.
    pub n_points: usize,
    /// Probes skipped because the dual solve failed.
    pub n_excluded: usize,
    pub n_nodes: usize,
    /// `sup_err_value / (‖D²u‖∞ h²)`, when the field supplies the bound.
    pub c_value: Option<f64>,
    /// Errors at or below round-off; such rows do not enter the rate fit.
    pub value_at_roundoff: bool,
    pub grad_at_roundoff: bool,
}

/// Fitted convergence rates; `None` serialises as `null` (undefined).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rates {
    pub value: Option<f64>,
    pub grad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub field: String,
    pub dim: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub jitter: f64,
    pub seed: u64,
    pub rows: Vec<ErrorRow>,
    pub rates: Rates,
}

impl ErrorReport {
    pub fn fitted_rate_value(&self) -> Option<f64> {
        self.rates.value
    }

    pub fn fitted_rate_grad(&self) -> Option<f64> {
        self.rates.grad
    }

    pub fn epsilon_margin(&self) -> f64 {
        self.epsilon
    }

    /// Ratios `err(h_k) / err(h_{k+1})` of consecutive gradient errors.
    pub fn grad_ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].sup_err_grad / w[1].sup_err_grad).collect()
    }

    /// Largest `c_value` at finer `h` relative to the coarsest one.
    pub fn value_constant_growth(&self) -> Option<f64> {
        let c0 = self.rows.first()?.c_value?;
        if !(c0 > 0.0) {
            return None;
        }
        self.rows[1..].iter().filter_map(|r| r.c_value).map(|c| c / c0).reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// `h,err_value,err_grad` with one row per refinement level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,err_value,err_grad\n");
        for r in &self.rows {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.h, r.sup_err_value, r.sup_err_grad));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyOptions {
    /// Jitter passed to the node generator.
    pub jitter: f64,
    pub seed: u64,
    /// Probe lattice spacing is `h / probe_divisor`.
    pub probe_divisor: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { jitter: 0.0, seed: 0, probe_divisor: 3.0 }
    }
}

/// Sup errors of the interpolant of `field` over `Ω_{εh}` for each `h`.
pub fn error_study<T: Real>(
    field: &ScalarField<T>,
    domain: &Domain<T>,
    h_list: &[T],
    epsilon: T,
    params_template: &LmeParams<T>,
) -> Result<ErrorReport, InterpolationError> {
    error_study_with(field, domain, h_list, epsilon, params_template, &StudyOptions::default())
}

pub fn error_study_with<T: Real>(
    field: &ScalarField<T>,
    domain: &Domain<T>,
    h_list: &[T],
    epsilon: T,
    params_template: &LmeParams<T>,
    opts: &StudyOptions,
) -> Result<ErrorReport, InterpolationError> {
    validate_h_list(h_list)?;
    if !(epsilon > T::zero()) {
        return Err(InterpolationError::InvalidStudy(format!("epsilon must be positive, got {epsilon}")));
    }
    if field.dim != domain.dim() {
        return Err(InterpolationError::InvalidStudy(format!(
            "field is {}-d but the domain is {}-d",
            field.dim,
            domain.dim()
        )));
    }
    if !field.has_gradient() {
        return Err(InterpolationError::MissingDerivative { field: field.name.clone(), what: "gradient" });
    }
    let rows = h_list
        .par_iter()
        .map(|&h| study_level(field, domain, h, epsilon, params_template, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let pairs = |f: fn(&ErrorRow) -> (f64, bool)| -> Vec<(f64, f64)> {
        rows.iter()
            .map(|r| {
                let (e, roundoff) = f(r);
                (r.h, if roundoff { 0.0 } else { e })
            })
            .collect()
    };
    let rates = Rates {
        value: fit_rate(&pairs(|r| (r.sup_err_value, r.value_at_roundoff))),
        grad: fit_rate(&pairs(|r| (r.sup_err_grad, r.grad_at_roundoff))),
    };
    Ok(ErrorReport {
        field: field.name.clone(),
        dim: domain.dim(),
        gamma: params_template.gamma.as_f64(),
        epsilon: epsilon.as_f64(),
        jitter: opts.jitter,
        seed: opts.seed,
        rows,
        rates,
    })
}

fn validate_h_list<T: Real>(h_list: &[T]) -> Result<(), InterpolationError> {
    if h_list.len() < 3 {
        return Err(InterpolationError::InvalidStudy(format!("need at least 3 values of h, got {}", h_list.len())));
    }
    if h_list.iter().any(|h| !(*h > T::zero()) || !h.is_finite()) {
        return Err(InterpolationError::InvalidStudy("every h must be positive and finite".into()));
    }
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(InterpolationError::InvalidStudy("h values must be strictly decreasing".into()));
    }
    let span = (h_list[0] / h_list[h_list.len() - 1]).as_f64();
    if span < 4.0 - 1e-9 {
        return Err(InterpolationError::InvalidStudy(format!("h values span a ratio of {span:.3}, need at least 4")));
    }
    Ok(())
}

fn study_level<T: Real>(
    field: &ScalarField<T>,
    domain: &Domain<T>,
    h: T,
    epsilon: T,
    template: &LmeParams<T>,
    opts: &StudyOptions,
) -> Result<ErrorRow, InterpolationError> {
    let params = template.with_h(h);
    params.validate()?;
    let set = generate_grid_points(domain, h, T::lit(opts.jitter), opts.seed)?;
    if set.is_empty() {
        return Err(InterpolationError::InvalidStudy(format!("h = {h} exceeds the domain diameter")));
    }
    let samples: Vec<T> = set.points().iter().map(|p| field.value(p)).collect();
    let probes: Vec<Point<T>> = lattice_probes(domain, h / T::lit(opts.probe_divisor), epsilon * h);
    if probes.is_empty() {
        return Err(InterpolationError::InvalidStudy(format!("no probes at distance {epsilon}·h from the boundary for h = {h}")));
    }

    let errors: Vec<Option<(f64, f64)>> = probes
        .par_iter()
        .map(|x| {
            let (v, g) = interpolate_with_gradient(&samples, x, &set, &params).ok()?;
            let exact_g = field.gradient(x).expect("checked above");
            Some(((v - field.value(x)).abs().as_f64(), (g - exact_g).norm().as_f64()))
        })
        .collect();

    let mut sup_v = 0.0f64;
    let mut sup_g = 0.0f64;
    let mut n_points = 0;
    for (ev, eg) in errors.iter().flatten() {
        sup_v = sup_v.max(*ev);
        sup_g = sup_g.max(*eg);
        n_points += 1;
    }
    let n_excluded = errors.len() - n_points;
    if n_points == 0 {
        return Err(InterpolationError::InvalidStudy(format!("every probe failed to converge at h = {h}")));
    }

    let scale = samples.iter().fold(1.0f64, |m, u| m.max(u.abs().as_f64()));
    let hf = h.as_f64();
    let c_value = field
        .d2_sup_norm
        .map(|d2| d2.as_f64())
        .filter(|d2| *d2 > 0.0)
        .map(|d2| sup_v / (d2 * hf * hf));
    Ok(ErrorRow {
        h: hf,
        sup_err_value: sup_v,
        sup_err_grad: sup_g,
        n_points,
        n_excluded,
        n_nodes: set.len(),
        c_value,
        value_at_roundoff: sup_v <= VALUE_ROUNDOFF * scale,
        grad_at_roundoff: sup_g <= GRAD_ROUNDOFF * scale / hf,
    })
}

/// Value errors below `VALUE_ROUNDOFF · scale` are round-off.
const VALUE_ROUNDOFF: f64 = 1e-10;
/// Gradient errors below `GRAD_ROUNDOFF · scale / h` are round-off.
const GRAD_ROUNDOFF: f64 = 1e-8;
