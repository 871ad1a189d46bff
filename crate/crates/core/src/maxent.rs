//! Local maximum-entropy shape functions.
//!
//! At an evaluation point `x` the weights are
//!
//! ```text
//! w_a(x, λ) = exp(-β |x - x_a|² + <λ, x - x_a>) / Z(x, λ)
//! ```
//!
//! with `β = γ / h²` and `λ*(x)` the minimiser of `log Z(x, ·)`. The gradient
//! of `log Z` is `r = Σ w_a (x - x_a)` and its Hessian is
//! `J = Σ w_a (x - x_a) ⊗ (x - x_a) - r ⊗ r`; at the optimum `r = 0`, the
//! weights reproduce affine functions, and
//! `∇w_a = -w_a J*⁻¹ (x - x_a)`.
//!
//! All sums are evaluated with the largest exponent factored out, so `Z`
//! never overflows even when `|λ|` is large close to the hull boundary.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Point, PointSet};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmeError {
    #[error("no nodes in range of the evaluation point")]
    NoNodesInRange,
    #[error("dimension mismatch: point set is {expected}-d, evaluation point is {found}-d")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("evaluation point is outside the convex hull of the nodes (|λ|·h = {lambda_h:.3e})")]
    OutsideHull { lambda_h: f64 },
    #[error("dual solve did not converge in {iters} iterations (|r|/h = {residual:.3e})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("degenerate J: Hessian of log Z is singular at a bounded multiplier")]
    DegenerateJ,
    #[error("degenerate J*: active node set does not span the space")]
    DegenerateJStar,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Which nodes enter the sums at a point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff<T> {
    /// Nodes within `R_cut · h` of `x`.
    Radius(T),
    /// Every node.
    Exact,
}

/// Knobs of the scheme. `β = γ / h²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LmeParams<T> {
    pub gamma: T,
    pub h: T,
    /// Dimensionless; the dual solve stops once `|r| <= newton_tol · h`.
    pub newton_tol: T,
    pub max_iters: usize,
    pub cutoff: Cutoff<T>,
}

impl<T: Real> LmeParams<T> {
    /// Parameters with default tolerance, iteration cap and cut-off radius.
    pub fn new(gamma: T, h: T) -> Result<Self, LmeError> {
        let p = Self {
            gamma,
            h,
            newton_tol: T::default_tolerance(),
            max_iters: 100,
            cutoff: Cutoff::Radius(Self::default_cutoff(gamma)),
        };
        p.validate()?;
        Ok(p)
    }

    /// Smallest multiplier with `exp(-γ R²) < 1e-16`, never below 1.5.
    pub fn default_cutoff(gamma: T) -> T {
        let r = (T::lit(16.0) * T::LN_10() / gamma).sqrt() * T::lit(1.01);
        r.max(T::lit(1.5))
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff<T>) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_h(mut self, h: T) -> Self {
        self.h = h;
        self
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), LmeError> {
        let bad = |m: String| Err(LmeError::InvalidParameter(m));
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(self.newton_tol > T::zero()) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if let Cutoff::Radius(r) = self.cutoff {
            if !(r > T::one()) {
                return bad(format!("cutoff multiplier must exceed 1, got {r}"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn beta(&self) -> T {
        self.gamma / (self.h * self.h)
    }

    pub fn cutoff_radius(&self) -> T {
        match self.cutoff {
            Cutoff::Radius(r) => r * self.h,
            Cutoff::Exact => T::infinity(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStatus {
    Converged,
    MaxIters,
    OutsideHull,
}

/// Dual optimum at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualSolution<T> {
    pub lambda_star: Vector<T>,
    pub log_z: T,
    pub residual_norm: T,
    pub iters: usize,
    pub status: DualStatus,
}

/// `log Z`, its gradient `r` and Hessian `J` at `(x, λ)`.
#[derive(Clone, Copy, Debug)]
pub struct LogPartition<T> {
    pub log_z: T,
    pub r: Vector<T>,
    pub j: Matrix<T>,
}

/// Shape-function values (and optionally gradients) over the active nodes.
#[derive(Clone, Debug, Serialize)]
pub struct ShapeEval<T> {
    pub node_ids: Vec<usize>,
    pub weights: Vec<T>,
    pub gradients: Option<Vec<Vector<T>>>,
    pub j_star: Option<Matrix<T>>,
    pub dual: DualSolution<T>,
}

impl<T: Real> ShapeEval<T> {
    /// `Σ_a f(x_a) w_a`.
    pub fn contract(&self, values: impl Fn(usize) -> T) -> T {
        self.node_ids.iter().zip(&self.weights).map(|(&a, &w)| values(a) * w).sum()
    }
}

/// Offsets `x - x_a` and squared distances for the active nodes at `x`.
struct ActiveSet<T> {
    ids: Vec<usize>,
    offsets: Vec<Vector<T>>,
    dist2: Vec<T>,
}

impl<T: Real> ActiveSet<T> {
    fn gather(x: &Point<T>, set: &PointSet<T>, params: &LmeParams<T>) -> Result<Self, LmeError> {
        if x.dim() != set.dim() {
            return Err(LmeError::DimensionMismatch { expected: set.dim(), found: x.dim() });
        }
        let ids = set.neighbors_within(x, params.cutoff_radius());
        if ids.is_empty() {
            return Err(LmeError::NoNodesInRange);
        }
        let offsets: Vec<Vector<T>> = ids.iter().map(|&a| *x - *set.point(a)).collect();
        let dist2 = offsets.iter().map(|v| v.norm_squared()).collect();
        Ok(Self { ids, offsets, dist2 })
    }

    /// Exponents `-β|x - x_a|² + <λ, x - x_a>` and their maximum.
    fn exponents(&self, beta: T, lambda: &Vector<T>, out: &mut Vec<T>) -> T {
        out.clear();
        let mut m = T::neg_infinity();
        for (o, &d2) in self.offsets.iter().zip(&self.dist2) {
            let e = -beta * d2 + lambda.dot(o);
            m = m.max(e);
            out.push(e);
        }
        m
    }

    /// Normalised weights written to `w`; returns `log Z`.
    fn weights(&self, beta: T, lambda: &Vector<T>, w: &mut Vec<T>) -> T {
        let m = self.exponents(beta, lambda, w);
        let mut s = T::zero();
        for e in w.iter_mut() {
            *e = (*e - m).exp();
            s = s + *e;
        }
        let inv = T::one() / s;
        for e in w.iter_mut() {
            *e = *e * inv;
        }
        m + s.ln()
    }

    fn log_partition(&self, beta: T, lambda: &Vector<T>, w: &mut Vec<T>) -> LogPartition<T> {
        let log_z = self.weights(beta, lambda, w);
        let dim = lambda.dim();
        let mut r = Vector::zeros(dim);
        let mut j = Matrix::zeros(dim);
        for (o, &wa) in self.offsets.iter().zip(w.iter()) {
            r += o.scale(wa);
            j.add_weighted_outer(wa, o);
        }
        j.add_weighted_outer(-T::one(), &r);
        LogPartition { log_z, r, j }
    }
}

/// `log Z(x, λ)` with its gradient and Hessian in `λ`.
pub fn log_partition<T: Real>(
    x: &Point<T>,
    lambda: &Vector<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<LogPartition<T>, LmeError> {
    params.validate()?;
    let active = ActiveSet::gather(x, set, params)?;
    let mut w = Vec::with_capacity(active.ids.len());
    Ok(active.log_partition(params.beta(), lambda, &mut w))
}

const OUTSIDE_CONDITION: f64 = 1e14;
const OUTSIDE_LAMBDA_H: f64 = 1e3;
const UNDERFLOW_LAMBDA_H: f64 = 10.0;
const MAX_HALVINGS: usize = 30;

/// Minimises `log Z(x, ·)` by damped Newton iteration from `λ = 0`.
///
/// Steps are halved (at most 30 times) until `log Z` decreases. Returns
/// `status = OutsideHull` when `J` becomes numerically singular while
/// `|λ|·h > 1e3`, or loses a pivot entirely while `|λ|·h > 10`, and
/// `status = MaxIters` with the best iterate when the iteration budget
/// runs out.
pub fn solve_dual<T: Real>(x: &Point<T>, set: &PointSet<T>, params: &LmeParams<T>) -> Result<DualSolution<T>, LmeError> {
    params.validate()?;
    let active = ActiveSet::gather(x, set, params)?;
    let mut scratch = Vec::with_capacity(active.ids.len());
    solve_active(&active, params, &mut scratch)
}

fn solve_active<T: Real>(
    active: &ActiveSet<T>,
    params: &LmeParams<T>,
    w: &mut Vec<T>,
) -> Result<DualSolution<T>, LmeError> {
    let beta = params.beta();
    let h = params.h;
    let dim = active.offsets[0].dim();
    let target = params.newton_tol * h;
    let h2 = h * h;

    let mut lambda = Vector::zeros(dim);
    let mut cur = active.log_partition(beta, &lambda, w);
    let mut iters = 0;
    let finish = |lambda: Vector<T>, lp: &LogPartition<T>, iters, status| DualSolution {
        lambda_star: lambda,
        log_z: lp.log_z,
        residual_norm: lp.r.norm(),
        iters,
        status,
    };

    loop {
        let rnorm = cur.r.norm();
        if rnorm <= target {
            // one extra full Newton step takes the residual to round-off
            if let Some(chol) = cur.j.cholesky() {
                let cand = lambda - chol.solve(&cur.r);
                let next = active.log_partition(beta, &cand, w);
                if next.r.norm() < rnorm && next.log_z.is_finite() {
                    return Ok(finish(cand, &next, iters, DualStatus::Converged));
                }
            }
            return Ok(finish(lambda, &cur, iters, DualStatus::Converged));
        }
        if iters >= params.max_iters {
            return Ok(finish(lambda, &cur, iters, DualStatus::MaxIters));
        }
        iters += 1;

        let lambda_h = (lambda.norm() * h).as_f64();
        let chol = cur.j.cholesky();
        let ill_conditioned = match &chol {
            None => true,
            Some(_) => {
                let eig = cur.j.symmetric_eigenvalues();
                let lo = eig[0];
                let hi = eig[dim - 1].max(h2);
                !(lo > T::zero()) || (hi / lo).as_f64() > OUTSIDE_CONDITION
            }
        };
        // J can underflow to an exact zero pivot (weights of order e^-745)
        // well before |λ| h reaches the ill-conditioning threshold
        if (ill_conditioned && lambda_h > OUTSIDE_LAMBDA_H) || (chol.is_none() && lambda_h > UNDERFLOW_LAMBDA_H) {
            return Ok(finish(lambda, &cur, iters, DualStatus::OutsideHull));
        }
        // Newton first; if J cannot be factorised or the Newton direction
        // gives no descent, Levenberg steps with growing damping
        let scale = cur.j.max_abs();
        let mut mus: Vec<Option<T>> = Vec::new();
        if chol.is_some() {
            mus.push(None);
        }
        if scale > T::zero() && scale.is_finite() {
            let mut mu = scale * T::lit(1e-12);
            while mu <= scale * T::lit(1e4) {
                mus.push(Some(mu));
                mu = mu * T::lit(100.0);
            }
        }
        if mus.is_empty() {
            return Err(LmeError::DegenerateJ);
        }
        let mut accepted = None;
        for mu in mus {
            let step = match mu {
                None => chol.as_ref().map(|c| c.solve(&cur.r)),
                Some(mu) => damped_step(&cur.j, &cur.r, mu),
            };
            let Some(step) = step else { continue };
            accepted = line_search(active, beta, &lambda, &cur, &step, w);
            if accepted.is_some() {
                break;
            }
        }
        match accepted {
            Some((cand, next)) => {
                lambda = cand;
                cur = next;
            }
            None => {
                // no descent along the Newton direction: numerically stuck
                let status = if (lambda.norm() * h).as_f64() > OUTSIDE_LAMBDA_H {
                    DualStatus::OutsideHull
                } else {
                    DualStatus::MaxIters
                };
                return Ok(finish(lambda, &cur, iters, status));
            }
        }
    }
}

/// `(J + μ I)⁻¹ r`, if the shifted matrix factorises.
fn damped_step<T: Real>(j: &Matrix<T>, r: &Vector<T>, mu: T) -> Option<Vector<T>> {
    let mut reg = *j;
    for k in 0..j.dim() {
        reg.set(k, k, reg.get(k, k) + mu);
    }
    reg.cholesky().map(|c| c.solve(r))
}

/// Backtracking along `-step`: halves (at most [`MAX_HALVINGS`] times)
/// until `log Z` decreases, or stays flat at round-off with a smaller
/// residual.
fn line_search<T: Real>(
    active: &ActiveSet<T>,
    beta: T,
    lambda: &Vector<T>,
    cur: &LogPartition<T>,
    step: &Vector<T>,
    w: &mut Vec<T>,
) -> Option<(Vector<T>, LogPartition<T>)> {
    let rnorm = cur.r.norm();
    let mut t = T::one();
    for _ in 0..=MAX_HALVINGS {
        let cand = *lambda - step.scale(t);
        let next = active.log_partition(beta, &cand, w);
        let decrease = next.log_z < cur.log_z;
        let flat = (next.log_z - cur.log_z).abs() <= T::epsilon() * T::lit(4.0) * cur.log_z.abs().max(T::one());
        if next.log_z.is_finite() && (decrease || (flat && next.r.norm() < rnorm)) {
            return Some((cand, next));
        }
        t = t * T::lit(0.5);
    }
    None
}

fn require_converged<T: Real>(sol: &DualSolution<T>, h: T) -> Result<(), LmeError> {
    match sol.status {
        DualStatus::Converged => Ok(()),
        DualStatus::OutsideHull => Err(LmeError::OutsideHull { lambda_h: (sol.lambda_star.norm() * h).as_f64() }),
        DualStatus::MaxIters => Err(LmeError::NotConverged {
            iters: sol.iters,
            residual: (sol.residual_norm / h).as_f64(),
        }),
    }
}

/// Optimal weights `w*_a(x)` over the active nodes.
pub fn shape_values<T: Real>(x: &Point<T>, set: &PointSet<T>, params: &LmeParams<T>) -> Result<ShapeEval<T>, LmeError> {
    params.validate()?;
    let active = ActiveSet::gather(x, set, params)?;
    let mut w = Vec::with_capacity(active.ids.len());
    let dual = solve_active(&active, params, &mut w)?;
    require_converged(&dual, params.h)?;
    active.weights(params.beta(), &dual.lambda_star, &mut w);
    Ok(ShapeEval { node_ids: active.ids, weights: w, gradients: None, j_star: None, dual })
}

/// Optimal weights together with `∇w*_a(x)` and `J*(x)`.
pub fn shape_gradients<T: Real>(
    x: &Point<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<ShapeEval<T>, LmeError> {
    params.validate()?;
    let active = ActiveSet::gather(x, set, params)?;
    let mut w = Vec::with_capacity(active.ids.len());
    let dual = solve_active(&active, params, &mut w)?;
    require_converged(&dual, params.h)?;
    active.weights(params.beta(), &dual.lambda_star, &mut w);

    let dim = x.dim();
    let mut j_star = Matrix::zeros(dim);
    for (o, &wa) in active.offsets.iter().zip(&w) {
        j_star.add_weighted_outer(wa, o);
    }
    let chol = j_star.cholesky().ok_or(LmeError::DegenerateJStar)?;
    let gradients = active
        .offsets
        .iter()
        .zip(&w)
        .map(|(o, &wa)| chol.solve(o).scale(-wa))
        .collect();
    Ok(ShapeEval { node_ids: active.ids, weights: w, gradients: Some(gradients), j_star: Some(j_star), dual })
}

/// `f_β(x, w) = Σ w_a |x - x_a|² + β⁻¹ Σ w_a log w_a` with `0 log 0 = 0`.
///
/// `weights[k]` belongs to node `node_ids[k]`; unlisted nodes have weight 0.
pub fn primal_objective<T: Real>(
    x: &Point<T>,
    node_ids: &[usize],
    weights: &[T],
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<T, LmeError> {
    if node_ids.len() != weights.len() {
        return Err(LmeError::InvalidWeights(format!(
            "{} node ids but {} weights",
            node_ids.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= T::zero())) {
        return Err(LmeError::InvalidWeights(format!("negative weight {w}")));
    }
    let inv_beta = T::one() / params.beta();
    let mut f = T::zero();
    for (&a, &wa) in node_ids.iter().zip(weights) {
        f = f + wa * set.point(a).distance_squared(x);
        if wa > T::zero() {
            f = f + inv_beta * wa * wa.ln();
        }
    }
    Ok(f)
}
