use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::domain::{centroid, cross};
use super::{Domain, GeometryError, Point, PointSet};
use crate::linalg::{Vector, MAX_DIM};
use crate::scalar::Real;

/// Lattice spacing `h / sqrt(d)` used by the generator: the diagonal of a
/// lattice cell then equals `h`.
pub fn lattice_spacing<T: Real>(h: T, dim: usize) -> T {
    h / T::from_usize_lossy(dim).sqrt()
}

/// Number of equal steps of length at most `spacing` covering `len`.
fn steps<T: Real>(len: T, spacing: T) -> usize {
    let n = (len / spacing - T::lit(1e-9)).ceil();
    n.to_usize().unwrap_or(1).max(1)
}

/// Generates a node set for `domain`.
///
/// Nodes sit on a Cartesian lattice of spacing at most `h / sqrt(d)`; the
/// boundary is populated explicitly so the convex hull equals the closed
/// domain, and no node lies strictly between distance `0` and half a lattice
/// spacing from the boundary. Interior nodes are displaced by at most
/// `jitter * h / sqrt(d)`; boundary nodes never move.
///
/// For boxes every axis is split into `ceil(L / s)` equal steps, so the
/// spacing is exactly `s` whenever it divides the side length.
pub fn generate_grid_points<T: Real>(
    domain: &Domain<T>,
    h: T,
    jitter: T,
    seed: u64,
) -> Result<PointSet<T>, GeometryError> {
    let dim = domain.dim();
    if !(h > T::zero()) || !h.is_finite() {
        return Err(GeometryError::InvalidParameter(format!("h must be positive, got {h}")));
    }
    if !(jitter >= T::zero() && jitter < T::lit(0.5)) {
        return Err(GeometryError::InvalidParameter(format!("jitter must lie in [0, 0.5), got {jitter}")));
    }
    if h > domain.diameter() {
        return PointSet::new(dim, Vec::new());
    }
    let s = lattice_spacing(h, dim);
    let (mut points, boundary) = match domain {
        Domain::Box { lo, hi } => box_nodes(lo, hi, s),
        Domain::Polytope { .. } => polytope_nodes(domain, s),
    };
    if jitter > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amplitude = jitter * s;
        for (p, on_boundary) in points.iter_mut().zip(&boundary) {
            if *on_boundary {
                continue;
            }
            let offset = sample_unit_ball(&mut rng, dim);
            for k in 0..dim {
                p[k] = p[k] + amplitude * T::lit(offset[k]);
            }
        }
    }
    PointSet::new(dim, points)
}

fn sample_unit_ball(rng: &mut ChaCha8Rng, dim: usize) -> [f64; MAX_DIM] {
    loop {
        let mut v = [0.0; MAX_DIM];
        for c in v.iter_mut().take(dim) {
            *c = rng.gen_range(-1.0..1.0);
        }
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

fn axis_coords<T: Real>(lo: T, hi: T, s: T) -> Vec<T> {
    let n = steps(hi - lo, s);
    let step = (hi - lo) / T::from_usize_lossy(n);
    (0..=n)
        .map(|i| if i == n { hi } else { lo + step * T::from_usize_lossy(i) })
        .collect()
}

fn box_nodes<T: Real>(lo: &Vector<T>, hi: &Vector<T>, s: T) -> (Vec<Point<T>>, Vec<bool>) {
    let dim = lo.dim();
    let axes: Vec<Vec<T>> = (0..dim).map(|k| axis_coords(lo[k], hi[k], s)).collect();
    let mut points = Vec::new();
    let mut boundary = Vec::new();
    let mut idx = [0usize; MAX_DIM];
    loop {
        points.push(Point::from_fn(dim, |k| axes[k][idx[k]]));
        boundary.push((0..dim).any(|k| idx[k] == 0 || idx[k] + 1 == axes[k].len()));
        // first axis varies fastest
        let mut k = 0;
        loop {
            if k == dim {
                return (points, boundary);
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Accumulates nodes while merging near-coincident candidates.
struct NodeBuilder<T> {
    cell: T,
    tol: T,
    buckets: HashMap<[i64; MAX_DIM], Vec<usize>>,
    points: Vec<Point<T>>,
    boundary: Vec<bool>,
}

impl<T: Real> NodeBuilder<T> {
    fn new(s: T) -> Self {
        Self { cell: s, tol: s * T::lit(1e-9), buckets: HashMap::new(), points: Vec::new(), boundary: Vec::new() }
    }

    fn key(&self, p: &Point<T>) -> [i64; MAX_DIM] {
        let mut k = [0i64; MAX_DIM];
        for i in 0..p.dim() {
            k[i] = (p[i] / self.cell).floor().to_i64().unwrap_or(0);
        }
        k
    }

    fn insert(&mut self, p: Point<T>, on_boundary: bool) {
        let key = self.key(&p);
        let dim = p.dim();
        let mut probe = key;
        let span = 3usize.pow(dim as u32);
        for code in 0..span {
            let mut c = code;
            for i in 0..dim {
                probe[i] = key[i] + (c % 3) as i64 - 1;
                c /= 3;
            }
            if let Some(ids) = self.buckets.get(&probe) {
                if ids.iter().any(|&j| self.points[j].distance(&p) <= self.tol) {
                    return;
                }
            }
        }
        self.buckets.entry(key).or_default().push(self.points.len());
        self.points.push(p);
        self.boundary.push(on_boundary);
    }
}

fn polytope_nodes<T: Real>(domain: &Domain<T>, s: T) -> (Vec<Point<T>>, Vec<bool>) {
    let dim = domain.dim();
    let mut builder = NodeBuilder::new(s);
    match dim {
        1 => {
            let (lo, hi) = domain.bounding_box();
            let (pts, bnd) = box_nodes(&lo, &hi, s);
            return (pts, bnd);
        }
        2 => {
            let verts = order_polygon(&domain.vertices());
            for p in polygon_boundary(&verts, s) {
                builder.insert(p, true);
            }
        }
        _ => {
            let faces = domain.faces();
            for (fi, face) in faces.iter().enumerate() {
                let fverts = domain.face_vertices(fi);
                if fverts.len() < 3 {
                    continue;
                }
                // orthonormal frame (e1, e2) spanning the face plane
                let n = face.normal;
                let seed_axis = if n[0].abs() < T::lit(0.9) { Vector::unit(3, 0) } else { Vector::unit(3, 1) };
                let e1 = {
                    let c = cross(&n, &seed_axis);
                    c.scale(T::one() / c.norm())
                };
                let e2 = cross(&n, &e1);
                let origin = fverts[0];
                let to2 = |p: &Point<T>| {
                    let q = *p - origin;
                    Vector::from_slice(&[q.dot(&e1), q.dot(&e2)])
                };
                let to3 = |q: &Vector<T>| origin + e1.scale(q[0]) + e2.scale(q[1]);
                let poly = order_polygon(&fverts.iter().map(to2).collect::<Vec<_>>());
                for q in polygon_boundary(&poly, s) {
                    builder.insert(to3(&q), true);
                }
                for q in polygon_interior_lattice(&poly, s) {
                    builder.insert(to3(&q), true);
                }
            }
        }
    }
    // interior lattice anchored at the bounding box corner
    let (lo, hi) = domain.bounding_box();
    let (grid, _) = box_nodes(&lo, &hi, s);
    let gap = s * T::lit(0.5);
    for p in grid {
        if domain.distance_to_boundary(&p) >= gap {
            builder.insert(p, false);
        }
    }
    (builder.points, builder.boundary)
}

/// Sorts 2-D polygon vertices counter-clockwise around their centroid.
fn order_polygon<T: Real>(verts: &[Point<T>]) -> Vec<Point<T>> {
    let c = centroid(verts);
    let mut v = verts.to_vec();
    v.sort_by(|a, b| {
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        ta.partial_cmp(&tb).unwrap_or(std::cmp::Ordering::Equal)
    });
    v
}

/// Vertices plus equally spaced points (spacing at most `s`) along each edge.
fn polygon_boundary<T: Real>(verts: &[Point<T>], s: T) -> Vec<Point<T>> {
    let mut out = Vec::new();
    for i in 0..verts.len() {
        let a = verts[i];
        let b = verts[(i + 1) % verts.len()];
        let n = steps(a.distance(&b), s);
        for k in 0..n {
            let t = T::from_usize_lossy(k) / T::from_usize_lossy(n);
            out.push(a + (b - a).scale(t));
        }
    }
    out
}

/// Lattice points inside a convex CCW polygon at distance at least `s/2`
/// from its edges.
fn polygon_interior_lattice<T: Real>(verts: &[Point<T>], s: T) -> Vec<Point<T>> {
    let mut lo = verts[0];
    let mut hi = verts[0];
    for v in verts {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let edge_dist = |p: &Point<T>| {
        let mut m = T::infinity();
        for i in 0..verts.len() {
            let a = verts[i];
            let b = verts[(i + 1) % verts.len()];
            let e = b - a;
            // inward normal of a CCW polygon is the left normal
            let nrm = Vector::from_slice(&[-e[1], e[0]]);
            m = m.min((*p - a).dot(&nrm) / nrm.norm());
        }
        m
    };
    let (grid, _) = box_nodes(&lo, &hi, s);
    grid.into_iter().filter(|p| edge_dist(p) >= s * T::lit(0.5)).collect()
}

/// `n` seeded uniform samples from the points of `domain` at distance at
/// least `margin` from the boundary (rejection sampling in the bounding
/// box). Fewer than `n` come back only if the region is too thin to hit.
pub fn random_interior_probes<T: Real>(domain: &Domain<T>, n: usize, margin: T, seed: u64) -> Vec<Point<T>> {
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let budget = n.saturating_mul(1000).max(1000);
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        let p = Point::from_fn(dim, |k| lo[k] + (hi[k] - lo[k]) * T::lit(rng.gen::<f64>()));
        if domain.distance_to_boundary(&p) >= margin {
            out.push(p);
        }
    }
    out
}

/// Uniform probe lattice of the given spacing over the points of `domain`
/// at distance at least `margin` from the boundary.
pub fn lattice_probes<T: Real>(domain: &Domain<T>, spacing: T, margin: T) -> Vec<Point<T>> {
    let dim = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let inner_lo = Vector::from_fn(dim, |k| lo[k] + margin);
    let inner_hi = Vector::from_fn(dim, |k| hi[k] - margin);
    if (0..dim).any(|k| inner_lo[k] > inner_hi[k]) {
        return Vec::new();
    }
    let axes: Vec<Vec<T>> = (0..dim)
        .map(|k| {
            if inner_hi[k] - inner_lo[k] <= T::zero() {
                vec![inner_lo[k]]
            } else {
                axis_coords(inner_lo[k], inner_hi[k], spacing)
            }
        })
        .collect();
    let tol = spacing * T::lit(1e-9);
    let mut out = Vec::new();
    let mut idx = [0usize; MAX_DIM];
    loop {
        let p = Point::from_fn(dim, |k| axes[k][idx[k]]);
        if domain.distance_to_boundary(&p) >= margin - tol {
            out.push(p);
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
