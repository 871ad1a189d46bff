use serde::Serialize;

use super::{GeometryError, Point};
use crate::linalg::{solve_dense, Vector, MAX_DIM};
use crate::scalar::Real;

/// Closed half-space `{x : <normal, x> <= offset}` with an outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HalfSpace<T> {
    pub normal: Vector<T>,
    pub offset: T,
}

impl<T: Real> HalfSpace<T> {
    /// Signed distance from `x` to the bounding hyperplane, positive inside.
    #[inline]
    pub fn inside_distance(&self, x: &Point<T>) -> T {
        self.offset - self.normal.dot(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain<T> {
    /// Axis-aligned box `[lo, hi]`.
    Box { lo: Vector<T>, hi: Vector<T> },
    /// Bounded convex polytope given as an intersection of half-spaces.
    Polytope { faces: Vec<HalfSpace<T>> },
}

impl<T: Real> Domain<T> {
    pub fn new_box(lo: &[T], hi: &[T]) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::DimensionMismatch { expected: lo.len(), found: hi.len() });
        }
        if !(1..=MAX_DIM).contains(&lo.len()) {
            return Err(GeometryError::UnsupportedDimension(lo.len()));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(GeometryError::InvalidDomain("box must satisfy lo < hi componentwise".into()));
        }
        Ok(Domain::Box { lo: Vector::from_slice(lo), hi: Vector::from_slice(hi) })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit_box(dim: usize) -> Result<Self, GeometryError> {
        Self::new_box(&vec![T::zero(); dim], &vec![T::one(); dim])
    }

    pub fn new_polytope(faces: Vec<HalfSpace<T>>) -> Result<Self, GeometryError> {
        let dim = faces
            .first()
            .map(|f| f.normal.dim())
            .ok_or_else(|| GeometryError::InvalidDomain("polytope needs at least one face".into()))?;
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        for f in &faces {
            if f.normal.dim() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, found: f.normal.dim() });
            }
            if (f.normal.norm() - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
                return Err(GeometryError::InvalidDomain("face normals must be unit length".into()));
            }
            if !f.offset.is_finite() {
                return Err(GeometryError::InvalidDomain("face offset must be finite".into()));
            }
        }
        let domain = Domain::Polytope { faces };
        if !domain.is_bounded() {
            return Err(GeometryError::InvalidDomain("polytope is unbounded".into()));
        }
        let verts = domain.vertices();
        if verts.len() < dim + 1 {
            return Err(GeometryError::InvalidDomain("polytope has empty interior".into()));
        }
        let centroid = centroid(&verts);
        if !(domain.distance_to_boundary(&centroid) > T::zero()) {
            return Err(GeometryError::InvalidDomain("polytope has empty interior".into()));
        }
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.dim(),
            Domain::Polytope { faces } => faces[0].normal.dim(),
        }
    }

    /// Half-space description. For boxes the faces are ordered axis by axis,
    /// lower face first: face 0 is `x_1 = lo_1`, face 1 is `x_1 = hi_1`, ...
    pub fn faces(&self) -> Vec<HalfSpace<T>> {
        match self {
            Domain::Box { lo, hi } => {
                let d = lo.dim();
                let mut out = Vec::with_capacity(2 * d);
                for k in 0..d {
                    out.push(HalfSpace { normal: -Vector::unit(d, k), offset: -lo[k] });
                    out.push(HalfSpace { normal: Vector::unit(d, k), offset: hi[k] });
                }
                out
            }
            Domain::Polytope { faces } => faces.clone(),
        }
    }

    /// Distance to the boundary for points inside (positive), negative outside.
    /// For convex polytopes this is the minimum over the face distances.
    pub fn distance_to_boundary(&self, x: &Point<T>) -> T {
        match self {
            Domain::Box { lo, hi } => {
                let mut m = T::infinity();
                for k in 0..lo.dim() {
                    m = m.min(x[k] - lo[k]).min(hi[k] - x[k]);
                }
                m
            }
            Domain::Polytope { faces } => {
                faces.iter().fold(T::infinity(), |m, f| m.min(f.inside_distance(x)))
            }
        }
    }

    pub fn contains(&self, x: &Point<T>, tol: T) -> bool {
        self.distance_to_boundary(x) >= -tol
    }

    /// Vertices of the domain (exact for boxes, by enumeration for polytopes).
    pub fn vertices(&self) -> Vec<Point<T>> {
        match self {
            Domain::Box { lo, hi } => {
                let d = lo.dim();
                (0..(1usize << d))
                    .map(|mask| {
                        Vector::from_fn(d, |k| if mask & (1 << k) == 0 { lo[k] } else { hi[k] })
                    })
                    .collect()
            }
            Domain::Polytope { faces } => enumerate_vertices(faces),
        }
    }

    /// Vertices lying on face `face` (as indexed by [`Domain::faces`]).
    pub fn face_vertices(&self, face: usize) -> Vec<Point<T>> {
        let faces = self.faces();
        let f = &faces[face];
        let scale = self.diameter().max(T::one());
        self.vertices()
            .into_iter()
            .filter(|v| f.inside_distance(v).abs() <= T::lit(1e-10) * scale)
            .collect()
    }

    pub fn bounding_box(&self) -> (Vector<T>, Vector<T>) {
        match self {
            Domain::Box { lo, hi } => (*lo, *hi),
            Domain::Polytope { .. } => {
                let verts = self.vertices();
                let d = self.dim();
                let mut lo = Vector::from_fn(d, |_| T::infinity());
                let mut hi = Vector::from_fn(d, |_| T::neg_infinity());
                for v in &verts {
                    for k in 0..d {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> T {
        let verts = self.vertices();
        let mut m = T::zero();
        for (i, a) in verts.iter().enumerate() {
            for b in &verts[i + 1..] {
                m = m.max(a.distance(b));
            }
        }
        m
    }

    fn is_bounded(&self) -> bool {
        let faces = match self {
            Domain::Box { .. } => return true,
            Domain::Polytope { faces } => faces,
        };
        let d = faces[0].normal.dim();
        let tol = T::lit(1e-12);
        let mut candidates: Vec<Vector<T>> = Vec::new();
        match d {
            1 => candidates.push(Vector::from_slice(&[T::one()])),
            2 => {
                for f in faces {
                    candidates.push(Vector::from_slice(&[-f.normal[1], f.normal[0]]));
                }
            }
            _ => {
                for (i, a) in faces.iter().enumerate() {
                    for b in &faces[i + 1..] {
                        let c = cross(&a.normal, &b.normal);
                        if c.norm() > tol {
                            candidates.push(c);
                        }
                    }
                }
                if candidates.is_empty() {
                    return false;
                }
            }
        }
        // The recession cone {v : <n_i, v> <= 0} is trivial iff no extreme
        // ray candidate (in either orientation) lies in it.
        !candidates.iter().any(|c| {
            [*c, -*c]
                .iter()
                .any(|v| faces.iter().all(|f| f.normal.dot(v) <= tol * v.norm()))
        })
    }
}

pub(crate) fn cross<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    Vector::from_slice(&[
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])
}

pub(crate) fn centroid<T: Real>(pts: &[Point<T>]) -> Point<T> {
    let d = pts[0].dim();
    let mut c = Vector::zeros(d);
    for p in pts {
        c += *p;
    }
    c.scale(T::one() / T::from_usize_lossy(pts.len()))
}

fn enumerate_vertices<T: Real>(faces: &[HalfSpace<T>]) -> Vec<Point<T>> {
    let d = faces[0].normal.dim();
    let n = faces.len();
    let mut out: Vec<Point<T>> = Vec::new();
    let mut push = |idx: &[usize]| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| faces[i].normal.to_f64_vec()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| faces[i].offset.as_f64()).collect();
        if let Some(sol) = solve_dense(a, b) {
            let v = Vector::from_fn(d, |k| T::lit(sol[k]));
            if !v.is_finite() {
                return;
            }
            let scale = v.max_abs().max(T::one());
            let feasible = faces.iter().all(|f| f.inside_distance(&v) >= -T::lit(1e-9) * scale);
            let dup = out.iter().any(|w| w.distance(&v) <= T::lit(1e-9) * scale);
            if feasible && !dup {
                out.push(v);
            }
        }
    };
    match d {
        1 => (0..n).for_each(|i| push(&[i])),
        2 => {
            for i in 0..n {
                for j in (i + 1)..n {
                    push(&[i, j]);
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        push(&[i, j, k]);
                    }
                }
            }
        }
    }
    out
}
