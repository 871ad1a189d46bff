//! Interpolants built from nodal samples, the multipoint Taylor identity and
//! h-refinement error studies.

mod field;
mod study;

pub use field::ScalarField;
pub use study::{error_study, error_study_with, fit_rate, ErrorReport, ErrorRow, Rates, StudyOptions};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, Point, PointSet};
use crate::linalg::Vector;
use crate::maxent::{shape_gradients, shape_values, LmeError, LmeParams};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpolationError {
    #[error(transparent)]
    Lme(#[from] LmeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unknown field {0:?} (expected affine, quadratic, sinusoid or gaussian-bump)")]
    UnknownField(String),
    #[error("field {field}: {what} disagrees with central differences at {at:?}")]
    FieldDerivativeMismatch { field: String, what: &'static str, at: Vec<f64> },
    #[error("field {field} has no analytic {what}")]
    MissingDerivative { field: String, what: &'static str },
    #[error("{found} samples for {expected} nodes")]
    SampleCountMismatch { expected: usize, found: usize },
    #[error("multi-index of degree {0} not supported (only |alpha| <= 1)")]
    UnsupportedOrder(usize),
    #[error("invalid study: {0}")]
    InvalidStudy(String),
}

/// A multi-index `α ∈ N^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MultiIndex {
    pub exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self { exponents: vec![0; dim] }
    }

    /// The unit multi-index `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut exponents = vec![0; dim];
        exponents[j] = 1;
        Self { exponents }
    }

    pub fn degree(&self) -> usize {
        self.exponents.iter().map(|&e| e as usize).sum()
    }

    /// Axis of a degree-one index.
    pub fn axis(&self) -> Option<usize> {
        (self.degree() == 1).then(|| self.exponents.iter().position(|&e| e == 1)).flatten()
    }
}

fn check_samples<T: Real>(samples: &[T], set: &PointSet<T>) -> Result<(), InterpolationError> {
    if samples.len() != set.len() {
        return Err(InterpolationError::SampleCountMismatch { expected: set.len(), found: samples.len() });
    }
    Ok(())
}

/// `u_I(x) = Σ_a u_a w*_a(x)`.
pub fn interpolate<T: Real>(
    samples: &[T],
    x: &Point<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<T, InterpolationError> {
    check_samples(samples, set)?;
    let eval = shape_values(x, set, params)?;
    Ok(eval.contract(|a| samples[a]))
}

/// `∇u_I(x) = Σ_a u_a ∇w*_a(x)`.
pub fn interpolate_gradient<T: Real>(
    samples: &[T],
    x: &Point<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<Vector<T>, InterpolationError> {
    interpolate_with_gradient(samples, x, set, params).map(|(_, g)| g)
}

/// Value and gradient of `u_I` from one dual solve.
pub fn interpolate_with_gradient<T: Real>(
    samples: &[T],
    x: &Point<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
) -> Result<(T, Vector<T>), InterpolationError> {
    check_samples(samples, set)?;
    let eval = shape_gradients(x, set, params)?;
    let grads = eval.gradients.as_ref().expect("shape_gradients fills gradients");
    let mut g = Vector::zeros(x.dim());
    for (&a, ga) in eval.node_ids.iter().zip(grads) {
        g += ga.scale(samples[a]);
    }
    Ok((eval.contract(|a| samples[a]), g))
}

/// Nodal samples of a field bundled with the node set they live on.
#[derive(Clone, Debug)]
pub struct Interpolant<'a, T> {
    pub set: &'a PointSet<T>,
    pub samples: Vec<T>,
    pub params: LmeParams<T>,
}

impl<'a, T: Real> Interpolant<'a, T> {
    pub fn new(set: &'a PointSet<T>, samples: Vec<T>, params: LmeParams<T>) -> Result<Self, InterpolationError> {
        check_samples(&samples, set)?;
        params.validate()?;
        Ok(Self { set, samples, params })
    }

    /// Samples `field` at every node.
    pub fn from_field(set: &'a PointSet<T>, field: &ScalarField<T>, params: LmeParams<T>) -> Result<Self, InterpolationError> {
        if field.dim != set.dim() {
            return Err(GeometryError::DimensionMismatch { expected: set.dim(), found: field.dim }.into());
        }
        let samples = set.points().iter().map(|p| field.value(p)).collect();
        Self::new(set, samples, params)
    }

    pub fn value(&self, x: &Point<T>) -> Result<T, InterpolationError> {
        interpolate(&self.samples, x, self.set, &self.params)
    }

    pub fn gradient(&self, x: &Point<T>) -> Result<Vector<T>, InterpolationError> {
        interpolate_gradient(&self.samples, x, self.set, &self.params)
    }

    pub fn value_and_gradient(&self, x: &Point<T>) -> Result<(T, Vector<T>), InterpolationError> {
        interpolate_with_gradient(&self.samples, x, self.set, &self.params)
    }
}

/// First-order Taylor remainder `u(x_a) - u(x) - <∇u(x), x_a - x>`.
pub fn taylor_remainder<T: Real>(field: &ScalarField<T>, x_a: &Point<T>, x: &Point<T>) -> Result<T, InterpolationError> {
    let g = field.gradient(x).ok_or_else(|| InterpolationError::MissingDerivative {
        field: field.name.clone(),
        what: "gradient",
    })?;
    Ok(field.value(x_a) - field.value(x) - g.dot(&(*x_a - *x)))
}

/// `|D^α u_I(x) - D^α u(x) - Σ_a R(x, x_a) D^α w*_a(x)|` for `|α| <= 1`.
///
/// The expression vanishes identically for weights that satisfy the
/// zeroth and first order consistency conditions, so the return value
/// measures round-off in the shape functions.
pub fn multipoint_identity_residual<T: Real>(
    field: &ScalarField<T>,
    x: &Point<T>,
    set: &PointSet<T>,
    params: &LmeParams<T>,
    alpha: &MultiIndex,
) -> Result<T, InterpolationError> {
    let grad_u = field.gradient(x).ok_or_else(|| InterpolationError::MissingDerivative {
        field: field.name.clone(),
        what: "gradient",
    })?;
    let u_x = field.value(x);
    let remainder = |a: usize| -> T {
        let xa = set.point(a);
        field.value(xa) - u_x - grad_u.dot(&(*xa - *x))
    };
    match alpha.degree() {
        0 => {
            let eval = shape_values(x, set, params)?;
            let mut u_i = T::zero();
            let mut sum_r = T::zero();
            for (&a, &w) in eval.node_ids.iter().zip(&eval.weights) {
                u_i = u_i + field.value(set.point(a)) * w;
                sum_r = sum_r + remainder(a) * w;
            }
            Ok((u_i - u_x - sum_r).abs())
        }
        1 => {
            let j = alpha.axis().expect("degree one");
            let eval = shape_gradients(x, set, params)?;
            let grads = eval.gradients.as_ref().expect("shape_gradients fills gradients");
            let mut du_i = T::zero();
            let mut sum_r = T::zero();
            for (&a, g) in eval.node_ids.iter().zip(grads) {
                du_i = du_i + field.value(set.point(a)) * g[j];
                sum_r = sum_r + remainder(a) * g[j];
            }
            Ok((du_i - grad_u[j] - sum_r).abs())
        }
        n => Err(InterpolationError::UnsupportedOrder(n)),
    }
}
