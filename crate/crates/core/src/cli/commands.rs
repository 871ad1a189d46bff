use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::{CliError, RunConfig};
use crate::diagnostics::{
    boundary_scaling_probe, check_consistency_suite_with, closed_form_lambda_1d, concentration_sweep, decay_sweep,
    default_corner_probes, default_rho_list, dual_bounds_sweep, far_node_sweep, scale_weights_fault, BoundaryOptions,
    CheckReport, ConsistencyTolerances, Sweep,
};
use crate::geometry::{generate_grid_points, random_interior_probes, Domain, Point, PointSet};
use crate::interpolation::{error_study_with, ScalarField, StudyOptions};
use crate::io::{read_point_set, to_csv, to_json, write_text, Format};
use crate::maxent::{shape_gradients, shape_values, solve_dual, DualStatus, LmeError, LmeParams};

/// Result of one subcommand, ready to be written out.
pub(super) struct Outcome {
    pub json: String,
    pub pass: bool,
    pub summary: String,
    /// Extra files (path, contents) written alongside the report.
    pub files: Vec<(PathBuf, String)>,
}

impl Outcome {
    fn new(report: &Value, pass: bool, summary: String) -> Self {
        let mut json = serde_json::to_string_pretty(report).expect("report serialises");
        json.push('\n');
        Self { json, pass, summary, files: Vec::new() }
    }
}

/// Writes the report to `--out` (printing the summary) or to stdout.
pub(super) fn emit(cfg: &RunConfig, outcome: &Outcome) -> Result<(), CliError> {
    for (path, text) in &outcome.files {
        write_text(path, text)?;
    }
    match &cfg.out {
        Some(path) => {
            write_text(path, &outcome.json)?;
            if !cfg.quiet {
                println!("{}", outcome.summary);
            }
        }
        None if !cfg.quiet => print!("{}", outcome.json),
        None => {}
    }
    Ok(())
}

fn domain(cfg: &RunConfig) -> Result<Domain<f64>, CliError> {
    let (lo, hi) = cfg.box_corners()?;
    Ok(Domain::new_box(&lo, &hi)?)
}

fn params(gamma: f64, h: f64) -> Result<LmeParams<f64>, CliError> {
    Ok(LmeParams::new(gamma, h)?)
}

fn summary_line(command: &str, checks: &[CheckReport]) -> String {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.check.as_str()).collect();
    if failed.is_empty() {
        format!("{command}: {} checks, all pass", checks.len())
    } else {
        format!("{command}: {} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))
    }
}

pub(super) fn gen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg)?;
    let h = cfg.h_or(0.1);
    let set = generate_grid_points(&dom, h, cfg.jitter, cfg.seed)?;
    let summary = format!("gen: {} nodes, h = {h}", set.len());
    let json = match cfg.out.as_deref().map(Format::from_path) {
        Some(Format::Csv) => to_csv(&set),
        _ => {
            let mut j = to_json(&set);
            j.push('\n');
            j
        }
    };
    Ok(Outcome { json, pass: true, summary, files: Vec::new() })
}

#[derive(Serialize)]
struct EvalOutput {
    config: RunConfig,
    h: f64,
    x: Vec<f64>,
    node_ids: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    gradients: Option<Vec<Vec<f64>>>,
    lambda_star: Vec<f64>,
    log_z: f64,
    iters: usize,
    status: DualStatus,
}

pub(super) fn eval(cfg: &RunConfig, points: &Path, x: &[f64]) -> Result<Outcome, CliError> {
    let set: PointSet<f64> = read_point_set(points)?;
    if x.len() != set.dim() {
        return Err(CliError::Usage(format!("x has {} coordinates but the point set is {}-d", x.len(), set.dim())));
    }
    let h = match cfg.h {
        Some(h) => h,
        None => {
            let m = set.median_spacing().ok_or_else(|| {
                CliError::Usage("cannot derive h from fewer than two nodes; pass --h".into())
            })?;
            (set.dim() as f64).sqrt() * m
        }
    };
    let p = params(cfg.gamma, h)?;
    let xp = Point::from_slice(x);
    let dual = solve_dual(&xp, &set, &p)?;
    let mut out = EvalOutput {
        config: cfg.clone(),
        h,
        x: x.to_vec(),
        node_ids: None,
        weights: None,
        gradients: None,
        lambda_star: dual.lambda_star.to_f64_vec(),
        log_z: dual.log_z,
        iters: dual.iters,
        status: dual.status,
    };
    match dual.status {
        DualStatus::OutsideHull => {
            return Err(LmeError::OutsideHull { lambda_h: dual.lambda_star.norm() * h }.into());
        }
        DualStatus::MaxIters => {
            let report = serde_json::to_value(&out).expect("serialisable");
            return Ok(Outcome::new(&report, false, format!("eval: dual solve stopped after {} iterations", dual.iters)));
        }
        DualStatus::Converged => {}
    }
    let eval = match shape_gradients(&xp, &set, &p) {
        Err(LmeError::DegenerateJStar) => shape_values(&xp, &set, &p)?,
        r => r?,
    };
    out.node_ids = Some(eval.node_ids.clone());
    out.weights = Some(eval.weights.clone());
    out.gradients = eval.gradients.as_ref().map(|g| g.iter().map(|v| v.to_f64_vec()).collect());
    let report = serde_json::to_value(&out).expect("serialisable");
    Ok(Outcome::new(&report, true, format!("eval: {} active nodes at x = {x:?}", eval.node_ids.len())))
}

fn closed_form_check(cfg: &RunConfig) -> Result<CheckReport, CliError> {
    let (a, h) = (0.0, cfg.h_or(0.1));
    let set = PointSet::from_rows(&[vec![a], vec![a + h]])?;
    let p = params(cfg.gamma, h)?;
    let n = cfg.closed_form_points.max(1);
    let mut worst_lambda = 0.0f64;
    let mut worst_weight = 0.0f64;
    let mut failed = 0usize;
    for k in 1..=n {
        let x = a + h * k as f64 / (n + 1) as f64;
        let exact = closed_form_lambda_1d(x, a, h, cfg.gamma)?;
        match shape_values(&Point::from_slice(&[x]), &set, &p) {
            Ok(ev) => {
                worst_lambda = worst_lambda.max((ev.dual.lambda_star[0] - exact).abs() * h);
                let hat = [(a + h - x) / h, (x - a) / h];
                for (&id, &w) in ev.node_ids.iter().zip(&ev.weights) {
                    worst_weight = worst_weight.max((w - hat[id]).abs());
                }
            }
            Err(_) => failed += 1,
        }
    }
    let pass = failed == 0 && worst_lambda <= 1e-8 && worst_weight <= 1e-10;
    Ok(CheckReport::new(
        "closed_form_1d",
        json!({ "a": a, "h": h, "gamma": cfg.gamma, "points": n, "lambda_tol": 1e-8, "weight_tol": 1e-10 }),
        json!({ "worst_lambda_h": worst_lambda, "worst_weight": worst_weight, "failed_points": failed }),
        pass,
    ))
}

pub(super) fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg)?;
    if cfg.h_list.is_empty() {
        return Err(CliError::Usage("h_list is empty".into()));
    }
    let mut checks = Vec::new();

    let fault = scale_weights_fault(1e-6);
    let fault_ref: Option<&(dyn Fn(&mut _) + Sync)> = if cfg.fault == "scale_weights" { Some(&fault) } else { None };
    for (k, &h) in cfg.h_list.iter().enumerate() {
        let set = generate_grid_points(&dom, h, cfg.sweep_jitter, cfg.seed)?;
        let p = params(cfg.gamma, h)?;
        let probes = random_interior_probes(&dom, cfg.n_probes, cfg.epsilon * h, cfg.seed.wrapping_add(k as u64));
        let rep = check_consistency_suite_with(&set, &p, &probes, ConsistencyTolerances::default(), fault_ref);
        checks.push(rep.to_check());
    }

    let sweep = Sweep {
        jitter: cfg.sweep_jitter,
        seed: cfg.seed,
        probe_divisor: cfg.probe_divisor,
        ..Sweep::new(dom, cfg.h_list.clone(), cfg.gamma, cfg.epsilon)
    };
    checks.push(decay_sweep(&sweep, cfg.s)?.to_check());
    checks.push(concentration_sweep(&sweep, cfg.theta)?.to_check());
    let (bounds, _) = dual_bounds_sweep(&sweep)?;
    checks.extend(bounds.iter().map(|b| b.to_check()));
    checks.push(closed_form_check(cfg)?);

    let pass = checks.iter().all(|c| c.pass);
    let summary = summary_line("verify", &checks);
    let report = json!({ "command": "verify", "config": cfg, "seed": cfg.seed, "checks": checks, "pass": pass });
    Ok(Outcome::new(&report, pass, summary))
}

fn in_window(rate: Option<f64>, lo: f64, hi: f64) -> bool {
    rate.is_none_or(|r| r >= lo && r <= hi)
}

pub(super) fn converge(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg)?;
    let field = ScalarField::<f64>::builtin(&cfg.field, cfg.dim)?;
    let first = *cfg.h_list.first().ok_or_else(|| CliError::Usage("h_list is empty".into()))?;
    let template = params(cfg.gamma, first)?;
    let opts = StudyOptions { jitter: cfg.jitter, seed: cfg.seed, probe_divisor: cfg.probe_divisor };
    let report = error_study_with(&field, &dom, &cfg.h_list, cfg.epsilon, &template, &opts)?;
    let value_ok = in_window(report.rates.value, cfg.rate_value_min, cfg.rate_value_max);
    let grad_ok = in_window(report.rates.grad, cfg.rate_grad_min, cfg.rate_grad_max);
    let pass = value_ok && grad_ok;
    let fmt = |r: Option<f64>| r.map_or("undefined".to_string(), |r| format!("{r:.3}"));
    let summary = format!(
        "converge {}: rate_value = {}, rate_grad = {}{}",
        cfg.field,
        fmt(report.rates.value),
        fmt(report.rates.grad),
        if pass { "" } else { " (outside window)" }
    );
    let json = json!({
        "command": "converge",
        "config": cfg,
        "seed": cfg.seed,
        "report": report,
        "rate_value_undefined": report.rates.value.is_none(),
        "rate_grad_undefined": report.rates.grad.is_none(),
        "windows": {
            "value": [cfg.rate_value_min, cfg.rate_value_max],
            "grad": [cfg.rate_grad_min, cfg.rate_grad_max],
        },
        "rate_value_ok": value_ok,
        "rate_grad_ok": grad_ok,
        "pass": pass,
    });
    let mut out = Outcome::new(&json, pass, summary);
    let csv_path = cfg.csv.clone().or_else(|| cfg.out.as_ref().map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        out.files.push((path, report.to_csv()));
    }
    Ok(out)
}

pub(super) fn boundary(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg)?;
    let h = cfg.h_or(0.1);
    let set = generate_grid_points(&dom, h, cfg.jitter, cfg.seed)?;
    let p = params(cfg.gamma, h)?;
    let rho = if cfg.rho_list.is_empty() { default_rho_list(h, cfg.rho_count) } else { cfg.rho_list.clone() };
    let opts = BoundaryOptions {
        tangential_offset: cfg.tangential_offset,
        delta: cfg.delta,
        eta: cfg.eta,
        s: cfg.boundary_s,
    };
    let probe = boundary_scaling_probe(&dom, cfg.face, &set, &p, &rho, &opts)?;
    let far = far_node_sweep(&dom, &set, &p, cfg.boundary_s, &cfg.far_r, &default_corner_probes(&dom, h))?;
    let checks = [probe.to_check(), far.to_check()];
    let pass = probe.pass && far.pass;
    let summary = summary_line("boundary", &checks);
    let json = json!({
        "command": "boundary",
        "config": cfg,
        "seed": cfg.seed,
        "rotation": probe.rotation,
        "probe": probe,
        "far_node": far,
        "checks": checks,
        "pass": pass,
    });
    Ok(Outcome::new(&json, pass, summary))
}
