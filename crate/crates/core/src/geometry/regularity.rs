use serde::Serialize;

use super::{lattice_probes, Domain, Point, PointSet, BARYCENTRIC_TOLERANCE};
use crate::linalg::solve_dense;
use crate::scalar::Real;

/// Empirical point-set regularity summary.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub h: f64,
    /// Largest `#(P ∩ B̄(x, h))` seen over probes and nodes.
    pub tau_hat: usize,
    pub covering_ok: bool,
    /// Largest, over probes, of the smallest containing simplex size.
    pub max_simplex_size: f64,
    /// Smallest boundary distance of a non-boundary node, in units of `h`.
    pub eta_hat: f64,
    pub n_probes: usize,
    /// First probe for which no simplex of size `< h` was found.
    pub first_failure: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct CoveringOptions {
    /// Number of nearest nodes searched for a containing simplex (`d >= 2`).
    pub k_nearest: usize,
}

impl CoveringOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self { k_nearest: if dim >= 3 { 14 } else { 10 } }
    }
}

/// `max #(P ∩ B̄(x, h))` over `probes ∪ P`: an empirical lower bound for the
/// true h-density bound.
pub fn h_density_bound<T: Real>(set: &PointSet<T>, h: T, probes: &[Point<T>]) -> usize {
    let mut buf = Vec::new();
    probes
        .iter()
        .chain(set.points())
        .map(|x| {
            set.neighbors_within_into(x, h, &mut buf);
            buf.len()
        })
        .max()
        .unwrap_or(0)
}

/// Number of nodes in the ring `(t-1) h <= |x_a - x| < t h`.
///
/// The rings are half-open so that they partition `P`; summing over
/// `t = 1..=T` gives `#(P ∩ B(x, T h))`.
pub fn ring_count<T: Real>(set: &PointSet<T>, x: &Point<T>, h: T, t: usize) -> usize {
    assert!(t >= 1, "ring index starts at 1");
    let inner = h * T::from_usize_lossy(t - 1);
    let outer = h * T::from_usize_lossy(t);
    set.neighbors_within(x, outer)
        .into_iter()
        .filter(|&i| {
            let d = set.point(i).distance(x);
            d >= inner && d < outer
        })
        .count()
}

/// Explicit ring bound `τ d^{d/2} |B₁| ((t+2)^d - max(t-3, 0)^d)`: the number
/// of lattice cells of side `h/√d` meeting the widened ring, times `τ`.
pub fn ring_count_bound(tau: usize, dim: usize, t: usize) -> f64 {
    let d = dim as f64;
    let unit_ball = std::f64::consts::PI.powf(d / 2.0) / gamma_half_integer(dim + 2);
    let outer = (t as f64 + 2.0).powi(dim as i32);
    let inner = (t as f64 - 3.0).max(0.0).powi(dim as i32);
    tau as f64 * d.powf(d / 2.0) * unit_ball * (outer - inner)
}

/// `Γ(n/2)` for positive integers `n`.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut k = 0.5;
        while k < n as f64 / 2.0 - 0.25 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

/// Probe grid of spacing `h/4` over the closed domain, plus the nodes.
pub fn default_covering_probes<T: Real>(set: &PointSet<T>, domain: &Domain<T>, h: T) -> Vec<Point<T>> {
    let mut probes = lattice_probes(domain, h / T::lit(4.0), T::zero());
    probes.extend_from_slice(set.points());
    probes
}

/// Checks the h-covering property at the given probes and gathers the other
/// regularity measures.
pub fn verify_h_covering<T: Real>(
    set: &PointSet<T>,
    domain: &Domain<T>,
    h: T,
    probes: &[Point<T>],
    options: CoveringOptions,
) -> RegularityReport {
    let dim = set.dim();
    let h64 = h.as_f64();
    let mut max_size = 0.0f64;
    let mut first_failure = None;
    let sorted_1d: Vec<f64> = if dim == 1 {
        let mut v: Vec<f64> = set.points().iter().map(|p| p[0].as_f64()).collect();
        v.sort_by(f64::total_cmp);
        v
    } else {
        Vec::new()
    };
    for x in probes {
        let size = if dim == 1 {
            smallest_segment_1d(&sorted_1d, x[0].as_f64())
        } else {
            smallest_simplex_nd(set, x, options.k_nearest)
        };
        max_size = max_size.max(size);
        if !(size < h64) && first_failure.is_none() {
            first_failure = Some(x.to_f64_vec());
        }
    }
    let scale = domain.diameter().max(T::one());
    let eta_hat = set
        .points()
        .iter()
        .map(|p| domain.distance_to_boundary(p))
        .filter(|&d| d > T::lit(1e-12) * scale)
        .fold(f64::INFINITY, |m, d| m.min(d.as_f64() / h64));
    RegularityReport {
        h: h64,
        tau_hat: h_density_bound(set, h, probes),
        covering_ok: first_failure.is_none(),
        max_simplex_size: max_size,
        eta_hat,
        n_probes: probes.len(),
        first_failure,
    }
}

/// In one dimension the simplices are segments; the best one containing `x`
/// is a gap between consecutive nodes.
fn smallest_segment_1d(sorted: &[f64], x: f64) -> f64 {
    let n = sorted.len();
    if n < 2 || x < sorted[0] || x > sorted[n - 1] {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    for w in sorted.windows(2) {
        if w[0] <= x && x <= w[1] {
            best = best.min(w[1] - w[0]);
        }
    }
    best
}

fn smallest_simplex_nd<T: Real>(set: &PointSet<T>, x: &Point<T>, k: usize) -> f64 {
    let dim = set.dim();
    let near: Vec<Vec<f64>> = set.k_nearest(x, k).iter().map(|&i| set.point(i).to_f64_vec()).collect();
    let xf = x.to_f64_vec();
    let mut best = f64::INFINITY;
    let mut combo: Vec<usize> = (0..=dim).collect();
    let m = near.len();
    if m < dim + 1 {
        return best;
    }
    loop {
        let verts: Vec<&[f64]> = combo.iter().map(|&i| near[i].as_slice()).collect();
        let max_edge = max_pairwise(&verts);
        // the enclosing diameter is at least the longest edge
        if max_edge < best && simplex_contains(&verts, &xf) {
            best = best.min(smallest_enclosing_ball_diameter(&verts));
        }
        // next combination in lexicographic order
        let r = dim + 1;
        let mut i = r;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] < m - r + i {
                combo[i] += 1;
                for j in (i + 1)..r {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn max_pairwise(pts: &[&[f64]]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            m = m.max(dist2(pts[i], pts[j]));
        }
    }
    m.sqrt()
}

/// Barycentric containment with tolerance; degenerate simplices never contain.
fn simplex_contains(verts: &[&[f64]], x: &[f64]) -> bool {
    let d = x.len();
    let p0 = verts[0];
    let a: Vec<Vec<f64>> = (0..d).map(|row| (1..=d).map(|j| verts[j][row] - p0[row]).collect()).collect();
    let scale = max_pairwise(verts).max(f64::MIN_POSITIVE);
    if simplex_volume_factor(&a) <= 1e-12 * scale.powi(d as i32) {
        return false;
    }
    let b: Vec<f64> = (0..d).map(|row| x[row] - p0[row]).collect();
    match solve_dense(a, b) {
        Some(lam) => {
            let l0 = 1.0 - lam.iter().sum::<f64>();
            l0 >= -BARYCENTRIC_TOLERANCE && lam.iter().all(|&l| l >= -BARYCENTRIC_TOLERANCE)
        }
        None => false,
    }
}

fn simplex_volume_factor(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        1 => a[0][0].abs(),
        2 => (a[0][0] * a[1][1] - a[0][1] * a[1][0]).abs(),
        _ => (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))
            .abs(),
    }
}

/// Diameter of the smallest ball enclosing up to four points in `R^d`,
/// `d <= 3`, found by testing the circumballs of every subset.
pub fn smallest_enclosing_ball_diameter(pts: &[&[f64]]) -> f64 {
    let n = pts.len();
    if n == 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << n) {
        let subset: Vec<&[f64]> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]).collect();
        if let Some((c, r2)) = circumball(&subset) {
            let r = r2.sqrt();
            if 2.0 * r >= best {
                continue;
            }
            let tol = 1e-12 * (1.0 + r);
            if pts.iter().all(|p| dist2(p, &c).sqrt() <= r + tol) {
                best = 2.0 * r;
            }
        }
    }
    best
}

/// Centre and squared radius of the smallest sphere through all points of
/// `subset`, with centre in their affine hull.
fn circumball(subset: &[&[f64]]) -> Option<(Vec<f64>, f64)> {
    let p0 = subset[0];
    let k = subset.len() - 1;
    if k == 0 {
        return Some((p0.to_vec(), 0.0));
    }
    let diffs: Vec<Vec<f64>> = subset[1..].iter().map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
    let gram: Vec<Vec<f64>> = diffs
        .iter()
        .map(|u| diffs.iter().map(|v| u.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let rhs: Vec<f64> = diffs.iter().map(|u| 0.5 * u.iter().map(|a| a * a).sum::<f64>()).collect();
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(*v));
    let det_ok = match k {
        1 => gram[0][0] > 1e-24 * scale.max(1e-300),
        _ => {
            let det = if k == 2 {
                gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0]
            } else {
                simplex_volume_factor(&gram)
            };
            det.abs() > 1e-12 * scale.powi(k as i32)
        }
    };
    if !det_ok {
        return None;
    }
    let alpha = solve_dense(gram, rhs)?;
    let mut c = p0.to_vec();
    for (a, u) in alpha.iter().zip(&diffs) {
        for (ci, ui) in c.iter_mut().zip(u) {
            *ci += a * ui;
        }
    }
    let r2 = dist2(&c, p0);
    Some((c, r2))
}

/// Affine rank of the given nodes: 0 for a single point, `d` for a full
/// simplex.
pub fn affine_rank<T: Real>(points: &[Point<T>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let dim = points[0].dim();
    let p0 = points[0];
    let scale = points.iter().fold(T::zero(), |m, p| m.max(p.distance(&p0)));
    if !(scale > T::zero()) {
        return 0;
    }
    // Gram-Schmidt on the difference vectors
    let tol = T::lit(1e-10) * scale;
    let mut basis: Vec<Point<T>> = Vec::new();
    for p in &points[1..] {
        let mut v = *p - p0;
        for b in &basis {
            v = v - b.scale(v.dot(b));
        }
        let n = v.norm();
        if n > tol {
            basis.push(v.scale(T::one() / n));
            if basis.len() == dim {
                break;
            }
        }
    }
    basis.len()
}

/// Checks that no node satisfies `0 < dist(x_a, ∂Ω) < eta h`.
pub fn eta_gap_holds<T: Real>(set: &PointSet<T>, domain: &Domain<T>, eta: T, h: T) -> bool {
    let tol = T::lit(1e-12) * domain.diameter().max(T::one());
    set.points().iter().all(|p| {
        let d = domain.distance_to_boundary(p);
        d <= tol || d >= eta * h - tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_grid_points;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quarter_grid() -> PointSet<f64> {
        PointSet::from_rows(&[vec![0.0], vec![0.25], vec![0.5], vec![0.75], vec![1.0]]).unwrap()
    }

    #[test]
    fn density_on_quarter_grid() {
        let set = quarter_grid();
        let probes = set.points().to_vec();
        assert_eq!(h_density_bound(&set, 0.25, &probes), 3);
        let single = PointSet::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(h_density_bound(&single, 10.0, &[]), 1);
    }

    #[test]
    fn density_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..150).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let set = PointSet::from_rows(&rows).unwrap();
        let brute = rows
            .iter()
            .map(|a| rows.iter().filter(|b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= 0.3).count())
            .max()
            .unwrap();
        assert_eq!(h_density_bound(&set, 0.3, &[]), brute);
    }

    #[test]
    fn ring_counts_on_quarter_grid() {
        let set = quarter_grid();
        let x = Point::from_slice(&[0.5]);
        assert_eq!(ring_count(&set, &x, 0.25, 1), 1);
        assert_eq!(ring_count(&set, &x, 0.25, 2), 2);
        assert_eq!(ring_count(&set, &x, 0.25, 3), 2);
    }

    #[test]
    fn covering_in_1d() {
        let dom = Domain::<f64>::unit_box(1).unwrap();
        let set = quarter_grid();
        let probes = default_covering_probes(&set, &dom, 0.3);
        let rep = verify_h_covering(&set, &dom, 0.3, &probes, CoveringOptions::for_dim(1));
        assert!(rep.covering_ok);
        assert!((rep.max_simplex_size - 0.25).abs() < 1e-15);

        let sparse = PointSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let probes = default_covering_probes(&sparse, &dom, 0.5);
        let rep = verify_h_covering(&sparse, &dom, 0.5, &probes, CoveringOptions::for_dim(1));
        assert!(!rep.covering_ok);
        assert_eq!(rep.first_failure, Some(vec![0.0]));
    }

    /// Exhaustive oracle: every triangle of the node set.
    fn brute_smallest_triangle(set: &PointSet<f64>, x: &[f64]) -> f64 {
        let pts: Vec<Vec<f64>> = set.points().iter().map(|p| p.to_f64_vec()).collect();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                for k in (j + 1)..pts.len() {
                    let v = [pts[i].as_slice(), pts[j].as_slice(), pts[k].as_slice()];
                    if simplex_contains(&v, x) {
                        best = best.min(smallest_enclosing_ball_diameter(&v));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn covering_on_square_grid_matches_exhaustive_search() {
        let dom = Domain::<f64>::unit_box(2).unwrap();
        // spacing 0.25; right-triangle halves have size = cell diagonal
        let set = generate_grid_points(&dom, 0.25 * 2f64.sqrt(), 0.0, 0).unwrap();
        let diag = 0.25 * 2f64.sqrt();
        let probes = lattice_probes(&dom, 0.1, 0.0);
        for x in probes.iter().step_by(7) {
            let fast = smallest_simplex_nd(&set, x, 10);
            let brute = brute_smallest_triangle(&set, x.as_slice());
            assert!((fast - brute).abs() < 1e-12, "probe {x:?}: {fast} vs {brute}");
            assert!(brute <= diag + 1e-12);
        }
        let rep = verify_h_covering(&set, &dom, diag * 1.01, &probes, CoveringOptions::for_dim(2));
        assert!(rep.covering_ok);
        assert!(rep.max_simplex_size < diag * 1.01);
        let rep = verify_h_covering(&set, &dom, diag * 0.9, &probes, CoveringOptions::for_dim(2));
        assert!(!rep.covering_ok);
        assert!(rep.first_failure.is_some());
    }

    #[test]
    fn enclosing_ball_cases() {
        // obtuse triangle: ball determined by the long edge
        let t = [[0.0, 0.0], [4.0, 0.0], [2.0, 0.5]];
        let v: Vec<&[f64]> = t.iter().map(|p| p.as_slice()).collect();
        assert!((smallest_enclosing_ball_diameter(&v) - 4.0).abs() < 1e-12);
        // equilateral triangle with unit side: circumdiameter 2/sqrt(3)
        let e = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let v: Vec<&[f64]> = e.iter().map(|p| p.as_slice()).collect();
        assert!((smallest_enclosing_ball_diameter(&v) - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        // regular tetrahedron corners of a cube with side 1: diameter sqrt(3)
        let q = [[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let v: Vec<&[f64]> = q.iter().map(|p| p.as_slice()).collect();
        assert!((smallest_enclosing_ball_diameter(&v) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ring_counts_respect_explicit_bound() {
        let dom = Domain::<f64>::unit_box(2).unwrap();
        let h = 0.02;
        let set = generate_grid_points(&dom, h, 0.0, 0).unwrap();
        let probes = [Point::from_slice(&[0.5, 0.5]), Point::from_slice(&[0.503, 0.41])];
        let tau = h_density_bound(&set, h, &probes);
        let ratio = |t: usize| {
            probes.iter().map(|x| ring_count(&set, x, h, t) as f64 / t as f64).fold(0.0, f64::max)
        };
        let c_hat = (1..=3).map(ratio).fold(0.0, f64::max);
        for t in 1..=20 {
            for x in &probes {
                assert!(ring_count(&set, x, h, t) as f64 <= ring_count_bound(tau, 2, t));
            }
            // count / t stays bounded: on a lattice it tends to 4π from below
            assert!(ratio(t) <= 2.0 * c_hat, "t={t}: {} vs {c_hat}", ratio(t));
        }
    }

    #[test]
    fn rings_partition_the_open_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let set = PointSet::from_rows(&rows).unwrap();
        for _ in 0..20 {
            let x = Point::from_slice(&[rng.gen(), rng.gen()]);
            let h = rng.gen_range(0.02..0.1);
            for big_t in 1..8 {
                let total: usize = (1..=big_t).map(|t| ring_count(&set, &x, h, t)).sum();
                let radius = h * big_t as f64;
                let open = (0..set.len()).filter(|&i| set.point(i).distance(&x) < radius).count();
                assert_eq!(total, open);
            }
        }
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((gamma_half_integer(3) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-15);
        // |B_1| in 2-d is π: bound at t = 1 is τ·2·π·27
        assert!((ring_count_bound(1, 2, 1) - 2.0 * std::f64::consts::PI * 9.0).abs() < 1e-12);
    }

    #[test]
    fn affine_rank_detects_degeneracy() {
        let p = |v: &[f64]| Point::from_slice(v);
        assert_eq!(affine_rank(&[p(&[0.0, 0.0])]), 0);
        assert_eq!(affine_rank(&[p(&[0.0, 0.0]), p(&[1.0, 1.0]), p(&[2.0, 2.0])]), 1);
        assert_eq!(affine_rank(&[p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])]), 2);
    }

    #[test]
    fn generated_sets_satisfy_eta_gap() {
        let dom = Domain::<f64>::unit_box(2).unwrap();
        let set = generate_grid_points(&dom, 0.1, 0.3, 9).unwrap();
        assert!(eta_gap_holds(&set, &dom, 0.5 / 2f64.sqrt(), 0.1));
        let bad = PointSet::from_rows(&[vec![0.0, 0.0], vec![0.001, 0.5]]).unwrap();
        assert!(!eta_gap_holds(&bad, &dom, 0.3, 0.1));
    }
}
