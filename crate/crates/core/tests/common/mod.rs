//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the solver being tested.

#![allow(dead_code)]

use std::collections::HashMap;

use lme::geometry::{Point, PointSet};
use lme::maxent::{shape_values, LmeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(n: usize, dim: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect()).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `log Σ exp(-β|x - x_a|² + <λ, x - x_a>)` summed term by term, no shift.
pub fn naive_log_z(x: &[f64], lambda: &[f64], nodes: &[Vec<f64>], beta: f64) -> f64 {
    let mut z = 0.0;
    for a in nodes {
        let lin: f64 = lambda.iter().zip(x.iter().zip(a)).map(|(l, (xi, ai))| l * (xi - ai)).sum();
        z += (-beta * dist2(x, a) + lin).exp();
    }
    z.ln()
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Minimiser of the naive `log Z(λ)` in 2D: coarse grid search over
/// `μ = λ h ∈ [-40, 40]²`, then steepest descent with Armijo backtracking
/// on `μ`, gradients by central differences of the naive sum.
pub fn dual_oracle_2d(x: &[f64], nodes: &[Vec<f64>], beta: f64, h: f64) -> [f64; 2] {
    let f = |mu: [f64; 2]| naive_log_z(x, &[mu[0] / h, mu[1] / h], nodes, beta);
    let mut best = [0.0, 0.0];
    let mut fbest = f(best);
    for i in -40..=40 {
        for j in -40..=40 {
            let mu = [i as f64, j as f64];
            let v = f(mu);
            if v < fbest {
                best = mu;
                fbest = v;
            }
        }
    }
    let grad = |mu: [f64; 2]| {
        let e = 1e-6;
        [
            (f([mu[0] + e, mu[1]]) - f([mu[0] - e, mu[1]])) / (2.0 * e),
            (f([mu[0], mu[1] + e]) - f([mu[0], mu[1] - e])) / (2.0 * e),
        ]
    };
    let mut mu = best;
    for _ in 0..20000 {
        let g = grad(mu);
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        if gn < 1e-12 {
            break;
        }
        let f0 = f(mu);
        let mut t = 10.0;
        loop {
            let cand = [mu[0] - t * g[0], mu[1] - t * g[1]];
            if f(cand) <= f0 - 1e-4 * t * gn * gn || t < 1e-14 {
                mu = cand;
                break;
            }
            t *= 0.5;
        }
    }
    [mu[0] / h, mu[1] / h]
}

/// Minimiser of `Σ w_a |x - x_a|² + β⁻¹ Σ w_a log w_a` subject to
/// `Σ w_a = 1`, `Σ w_a x_a = x`, by infeasible-start Newton on the KKT
/// system with a positivity-preserving backtracking line search on the
/// residual norm.
pub fn primal_oracle(x: &[f64], nodes: &[Vec<f64>], beta: f64) -> Vec<f64> {
    let n = nodes.len();
    let d = x.len();
    let m = d + 1;
    let mut w = vec![1.0 / n as f64; n];
    let mut nu = vec![0.0; m];
    let row = |k: usize, a: usize| if k == 0 { 1.0 } else { nodes[a][k - 1] };
    let rhs = |k: usize| if k == 0 { 1.0 } else { x[k - 1] };
    let residual = |w: &[f64], nu: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(n + m);
        for a in 0..n {
            let g = dist2(x, &nodes[a]) + (w[a].ln() + 1.0) / beta;
            r.push(g + (0..m).map(|k| row(k, a) * nu[k]).sum::<f64>());
        }
        for k in 0..m {
            r.push((0..n).map(|a| row(k, a) * w[a]).sum::<f64>() - rhs(k));
        }
        r
    };
    let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
    for _ in 0..500 {
        let r = residual(&w, &nu);
        if norm(&r) < 1e-14 {
            break;
        }
        let mut kkt = vec![vec![0.0; n + m]; n + m];
        for a in 0..n {
            kkt[a][a] = 1.0 / (beta * w[a]);
            for k in 0..m {
                kkt[a][n + k] = row(k, a);
                kkt[n + k][a] = row(k, a);
            }
        }
        let step = gauss_solve(kkt, r.iter().map(|v| -v).collect());
        let mut t = 1.0;
        while (0..n).any(|a| w[a] + t * step[a] <= 0.0) {
            t *= 0.5;
        }
        let r0 = norm(&r);
        loop {
            let wn: Vec<f64> = (0..n).map(|a| w[a] + t * step[a]).collect();
            let nn: Vec<f64> = (0..m).map(|k| nu[k] + t * step[n + k]).collect();
            if norm(&residual(&wn, &nn)) <= (1.0 - 0.01 * t) * r0 || t < 1e-12 {
                w = wn;
                nu = nn;
                break;
            }
            t *= 0.5;
        }
    }
    w
}

/// Barycentric coordinates of `x` in the triangle `tri`.
pub fn barycentric(tri: [&[f64]; 3], x: &[f64]) -> [f64; 3] {
    let [a, b, c] = tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Triangle of `nodes` containing `x` whose circumcircle holds no other
/// node (the Delaunay triangle), by brute force.
pub fn delaunay_triangle(nodes: &[Vec<f64>], x: &[f64]) -> Option<([usize; 3], [f64; 3])> {
    let n = nodes.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let tri = [nodes[i].as_slice(), nodes[j].as_slice(), nodes[k].as_slice()];
                let bc = barycentric(tri, x);
                if !bc.iter().all(|l| l.is_finite() && *l > 1e-9) {
                    continue;
                }
                let (cx, cy, r2) = circumcircle(tri);
                let empty = (0..n)
                    .filter(|&q| q != i && q != j && q != k)
                    .all(|q| (nodes[q][0] - cx).powi(2) + (nodes[q][1] - cy).powi(2) > r2 * (1.0 + 1e-9));
                if empty {
                    return Some(([i, j, k], bc));
                }
            }
        }
    }
    None
}

fn circumcircle(t: [&[f64]; 3]) -> (f64, f64, f64) {
    let [a, b, c] = t;
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let s = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
    let ux = (s(a) * (b[1] - c[1]) + s(b) * (c[1] - a[1]) + s(c) * (a[1] - b[1])) / d;
    let uy = (s(a) * (c[0] - b[0]) + s(b) * (a[0] - c[0]) + s(c) * (b[0] - a[0])) / d;
    (ux, uy, (a[0] - ux).powi(2) + (a[1] - uy).powi(2))
}

/// Central differences of `shape_values` with step `step`, keyed by node
/// id. Nodes missing from one side's active set count as weight 0.
pub fn fd_gradients(set: &PointSet<f64>, params: &LmeParams<f64>, x: &[f64], step: f64) -> HashMap<usize, Vec<f64>> {
    let d = x.len();
    let mut out: HashMap<usize, Vec<f64>> = HashMap::new();
    for j in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += step;
        xm[j] -= step;
        let ep = shape_values(&Point::from_slice(&xp), set, params).expect("dual solve at x + step");
        let em = shape_values(&Point::from_slice(&xm), set, params).expect("dual solve at x - step");
        for (&a, &w) in ep.node_ids.iter().zip(&ep.weights) {
            out.entry(a).or_insert_with(|| vec![0.0; d])[j] += w / (2.0 * step);
        }
        for (&a, &w) in em.node_ids.iter().zip(&em.weights) {
            out.entry(a).or_insert_with(|| vec![0.0; d])[j] -= w / (2.0 * step);
        }
    }
    out
}
