use std::collections::HashMap;

use super::{GeometryError, Point, DUPLICATE_TOLERANCE};
use crate::linalg::MAX_DIM;
use crate::scalar::Real;

type CellKey = [i64; MAX_DIM];

/// Uniform bucketing of the nodes. Only an accelerator: every query falls
/// back to a linear scan when that would touch fewer entries.
#[derive(Clone, Debug)]
struct GridIndex<T> {
    origin: Point<T>,
    cell: T,
    buckets: HashMap<CellKey, Vec<usize>>,
}

impl<T: Real> GridIndex<T> {
    fn build(points: &[Point<T>], dim: usize, cell: T) -> Self {
        let mut origin = Point::from_fn(dim, |_| T::infinity());
        for p in points {
            for k in 0..dim {
                origin[k] = origin[k].min(p[k]);
            }
        }
        if points.is_empty() {
            origin = Point::zeros(dim);
        }
        let mut index = Self { origin, cell, buckets: HashMap::new() };
        for (i, p) in points.iter().enumerate() {
            let key = index.key(p);
            index.buckets.entry(key).or_default().push(i);
        }
        index
    }

    fn coord_key(&self, x: T, k: usize) -> i64 {
        let c = ((x - self.origin[k]) / self.cell).floor();
        c.max(T::lit(-1e15)).min(T::lit(1e15)).to_i64().unwrap_or(0)
    }

    fn key(&self, p: &Point<T>) -> CellKey {
        let mut key = [0i64; MAX_DIM];
        for k in 0..p.dim() {
            key[k] = self.coord_key(p[k], k);
        }
        key
    }
}

/// The node set `P` with a spatial index.
#[derive(Clone, Debug)]
pub struct PointSet<T> {
    dim: usize,
    points: Vec<Point<T>>,
    index: GridIndex<T>,
}

impl<T: Real> PointSet<T> {
    /// Builds a point set, rejecting non-finite coordinates, mixed
    /// dimensions, `d > 3`, and duplicates closer than `1e-12`.
    pub fn new(dim: usize, points: Vec<Point<T>>) -> Result<Self, GeometryError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, found: p.dim() });
            }
            if !p.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        let cell = estimate_cell_size(&points, dim);
        let set = Self { dim, index: GridIndex::build(&points, dim, cell), points };
        let tol = T::lit(DUPLICATE_TOLERANCE);
        for (i, p) in set.points.iter().enumerate() {
            if let Some(&j) = set.neighbors_within(p, tol).iter().find(|&&j| j != i) {
                return Err(GeometryError::DuplicatePoint { first: i.min(j), second: i.max(j) });
            }
        }
        Ok(set)
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, GeometryError> {
        let dim = rows.first().map(Vec::len).unwrap_or(1);
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        let mut pts = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(GeometryError::DimensionMismatch { expected: dim, found: r.len() });
            }
            pts.push(Point::from_slice(r));
        }
        Self::new(dim, pts)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, i: usize) -> &Point<T> {
        &self.points[i]
    }

    /// Indices `a` with `|x_a - x| <= radius`, in ascending order.
    pub fn neighbors_within(&self, x: &Point<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.neighbors_within_into(x, radius, &mut out);
        out
    }

    /// As [`PointSet::neighbors_within`], reusing `out`.
    pub fn neighbors_within_into(&self, x: &Point<T>, radius: T, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() || radius.is_nan() || radius < T::zero() {
            return;
        }
        let r2 = radius * radius;
        let reach = (radius / self.index.cell).ceil();
        let cells_per_axis = reach * T::lit(2.0) + T::one();
        let scan_cells = cells_per_axis.powi(self.dim as i32);
        if !radius.is_finite() || scan_cells > T::from_usize_lossy(self.points.len()) {
            out.extend(
                self.points
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.distance_squared(x) <= r2)
                    .map(|(i, _)| i),
            );
            return;
        }
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for k in 0..self.dim {
            lo[k] = self.index.coord_key(x[k] - radius, k);
            hi[k] = self.index.coord_key(x[k] + radius, k);
        }
        let mut key = lo;
        loop {
            if let Some(bucket) = self.index.buckets.get(&key) {
                out.extend(bucket.iter().copied().filter(|&i| self.points[i].distance_squared(x) <= r2));
            }
            // odometer over the cell range
            let mut k = 0;
            loop {
                if k == self.dim {
                    out.sort_unstable();
                    return;
                }
                if key[k] < hi[k] {
                    key[k] += 1;
                    break;
                }
                key[k] = lo[k];
                k += 1;
            }
        }
    }

    /// The `k` nearest nodes to `x` (ties broken by index), nearest first.
    pub fn k_nearest(&self, x: &Point<T>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut radius = self.index.cell;
        let mut cand = Vec::new();
        loop {
            self.neighbors_within_into(x, radius, &mut cand);
            if cand.len() >= k || cand.len() == self.points.len() {
                break;
            }
            radius = radius * T::lit(2.0);
        }
        cand.sort_by(|&a, &b| {
            self.points[a]
                .distance_squared(x)
                .partial_cmp(&self.points[b].distance_squared(x))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        cand.truncate(k);
        cand
    }

    /// Smallest distance between two distinct nodes, or `None` with fewer
    /// than two nodes.
    pub fn min_separation(&self) -> Option<T> {
        if self.points.len() < 2 {
            return None;
        }
        let mut best = T::infinity();
        for (i, p) in self.points.iter().enumerate() {
            if let Some(&j) = self.k_nearest(p, 2).iter().find(|&&j| j != i) {
                best = best.min(p.distance(&self.points[j]));
            }
        }
        Some(best)
    }

    /// Median nearest-neighbour distance, used as a default length scale.
    pub fn median_spacing(&self) -> Option<T> {
        if self.points.len() < 2 {
            return None;
        }
        let mut d: Vec<T> = self
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| {
                self.k_nearest(p, 2).into_iter().find(|&j| j != i).map(|j| p.distance(&self.points[j]))
            })
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Some(d[d.len() / 2])
    }
}

/// Free-function form of [`PointSet::neighbors_within`].
pub fn neighbors_within<T: Real>(set: &PointSet<T>, x: &Point<T>, radius: T) -> Vec<usize> {
    set.neighbors_within(x, radius)
}

fn estimate_cell_size<T: Real>(points: &[Point<T>], dim: usize) -> T {
    if points.len() < 2 {
        return T::one();
    }
    let mut lo = Point::from_fn(dim, |_| T::infinity());
    let mut hi = Point::from_fn(dim, |_| T::neg_infinity());
    for p in points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let extent = (0..dim).fold(T::zero(), |m, k| m.max(hi[k] - lo[k]));
    if !(extent > T::zero()) {
        return T::one();
    }
    let mut volume = T::one();
    for k in 0..dim {
        volume = volume * (hi[k] - lo[k]).max(extent * T::lit(1e-3));
    }
    let per_point = volume / T::from_usize_lossy(points.len());
    // roughly two node spacings per cell
    (per_point.powf(T::one() / T::from_usize_lossy(dim)) * T::lit(2.0)).max(extent * T::lit(1e-6))
}
