use std::fmt;
use std::sync::Arc;

use crate::geometry::Point;
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

use super::InterpolationError;

type ValueFn<T> = Arc<dyn Fn(&Point<T>) -> T + Send + Sync>;
type GradFn<T> = Arc<dyn Fn(&Point<T>) -> Vector<T> + Send + Sync>;
type HessFn<T> = Arc<dyn Fn(&Point<T>) -> Matrix<T> + Send + Sync>;

/// A scalar field with analytic derivatives.
#[derive(Clone)]
pub struct ScalarField<T> {
    pub name: String,
    pub dim: usize,
    value: ValueFn<T>,
    gradient: Option<GradFn<T>>,
    hessian: Option<HessFn<T>>,
    /// Bound on `max_ij sup |∂_i ∂_j u|` over the domain.
    pub d2_sup_norm: Option<T>,
}

impl<T> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("has_gradient", &self.gradient.is_some())
            .field("has_hessian", &self.hessian.is_some())
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(name: impl Into<String>, dim: usize, value: impl Fn(&Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self { name: name.into(), dim, value: Arc::new(value), gradient: None, hessian: None, d2_sup_norm: None }
    }

    pub fn with_gradient(mut self, g: impl Fn(&Point<T>) -> Vector<T> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, hess: impl Fn(&Point<T>) -> Matrix<T> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hess));
        self
    }

    pub fn with_d2_sup_norm(mut self, bound: T) -> Self {
        self.d2_sup_norm = Some(bound);
        self
    }

    #[inline]
    pub fn value(&self, x: &Point<T>) -> T {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point<T>) -> Option<Vector<T>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn hessian(&self, x: &Point<T>) -> Option<Matrix<T>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// Compares the supplied derivatives with central differences at
    /// `samples`; relative agreement within `1e-5` is required.
    pub fn check_derivatives(&self, samples: &[Point<T>]) -> Result<(), InterpolationError> {
        let step = T::lit(1e-5);
        let tol = T::lit(1e-5);
        for x in samples {
            if let Some(g) = self.gradient(x) {
                let fd = Vector::from_fn(self.dim, |k| {
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[k] = xp[k] + step;
                    xm[k] = xm[k] - step;
                    (self.value(&xp) - self.value(&xm)) / (step + step)
                });
                let scale = g.max_abs().max(T::one());
                if (fd - g).max_abs() > tol * scale {
                    return Err(InterpolationError::FieldDerivativeMismatch {
                        field: self.name.clone(),
                        what: "gradient",
                        at: x.to_f64_vec(),
                    });
                }
                if let Some(hs) = self.hessian(x) {
                    for k in 0..self.dim {
                        let mut xp = *x;
                        let mut xm = *x;
                        xp[k] = xp[k] + step;
                        xm[k] = xm[k] - step;
                        let (gp, gm) = (self.gradient(&xp).unwrap(), self.gradient(&xm).unwrap());
                        let col = (gp - gm).scale(T::one() / (step + step));
                        let scale = hs.max_abs().max(T::one());
                        for i in 0..self.dim {
                            if (col[i] - hs.get(i, k)).abs() > tol * scale {
                                return Err(InterpolationError::FieldDerivativeMismatch {
                                    field: self.name.clone(),
                                    what: "hessian",
                                    at: x.to_f64_vec(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `u(x) = c0 + <c1, x>`.
    pub fn affine(c0: T, c1: Vector<T>) -> Self {
        let dim = c1.dim();
        Self::new("affine", dim, move |x| c0 + c1.dot(x))
            .with_gradient(move |_| c1)
            .with_hessian(move |_| Matrix::zeros(dim))
            .with_d2_sup_norm(T::zero())
    }

    /// `u(x) = |x|²`.
    pub fn quadratic(dim: usize) -> Self {
        Self::new("quadratic", dim, |x| x.norm_squared())
            .with_gradient(|x| x.scale(T::lit(2.0)))
            .with_hessian(move |_| Matrix::from_fn(dim, |i, j| if i == j { T::lit(2.0) } else { T::zero() }))
            .with_d2_sup_norm(T::lit(2.0))
    }

    /// `u(x) = sin(π x_1) · Π_{k>1} cos(π x_k)`.
    pub fn sinusoid(dim: usize) -> Self {
        let pi = T::PI();
        let factors = move |x: &Point<T>| -> ([T; 3], [T; 3]) {
            // f_k and f_k' (without the π factor) per axis
            let mut f = [T::one(); 3];
            let mut df = [T::zero(); 3];
            for k in 0..x.dim() {
                let t = pi * x[k];
                if k == 0 {
                    f[k] = t.sin();
                    df[k] = t.cos();
                } else {
                    f[k] = t.cos();
                    df[k] = -t.sin();
                }
            }
            (f, df)
        };
        let prod_except = move |f: &[T; 3], dim: usize, skip: &[usize]| -> T {
            (0..dim).filter(|k| !skip.contains(k)).fold(T::one(), |p, k| p * f[k])
        };
        Self::new("sinusoid", dim, move |x| {
            let (f, _) = factors(x);
            prod_except(&f, x.dim(), &[])
        })
        .with_gradient(move |x| {
            let (f, df) = factors(x);
            Vector::from_fn(x.dim(), |k| pi * df[k] * prod_except(&f, x.dim(), &[k]))
        })
        .with_hessian(move |x| {
            let (f, df) = factors(x);
            let n = x.dim();
            Matrix::from_fn(n, |i, j| {
                if i == j {
                    // every factor satisfies f'' = -π² f
                    -pi * pi * prod_except(&f, n, &[])
                } else {
                    pi * pi * df[i] * df[j] * prod_except(&f, n, &[i, j])
                }
            })
        })
        .with_d2_sup_norm(pi * pi)
    }

    /// `u(x) = exp(-|x - c|² / (2 σ²))` centred at `(1/2, ..., 1/2)` with
    /// `σ = 0.2`.
    pub fn gaussian_bump(dim: usize) -> Self {
        let sigma = T::lit(0.2);
        let s2 = sigma * sigma;
        let c = Vector::from_fn(dim, |_| T::lit(0.5));
        Self::new("gaussian-bump", dim, move |x| (-(*x - c).norm_squared() / (s2 + s2)).exp())
            .with_gradient(move |x| {
                let d = *x - c;
                let u = (-d.norm_squared() / (s2 + s2)).exp();
                d.scale(-u / s2)
            })
            .with_hessian(move |x| {
                let d = *x - c;
                let u = (-d.norm_squared() / (s2 + s2)).exp();
                Matrix::from_fn(dim, |i, j| {
                    let id = if i == j { T::one() } else { T::zero() };
                    u * (d[i] * d[j] / (s2 * s2) - id / s2)
                })
            })
            // the largest second derivative is at the centre: 1/σ²
            .with_d2_sup_norm(T::one() / s2)
    }

    /// Looks up a built-in field by name.
    pub fn builtin(name: &str, dim: usize) -> Result<Self, InterpolationError> {
        match name {
            "affine" => {
                let c1 = Vector::from_fn(dim, |k| T::lit([0.7, -1.3, 0.4][k]));
                Ok(Self::affine(T::lit(0.25), c1))
            }
            "quadratic" => Ok(Self::quadratic(dim)),
            "sinusoid" => Ok(Self::sinusoid(dim)),
            "gaussian-bump" => Ok(Self::gaussian_bump(dim)),
            other => Err(InterpolationError::UnknownField(other.to_string())),
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 4] = ["affine", "quadratic", "sinusoid", "gaussian-bump"];
}
