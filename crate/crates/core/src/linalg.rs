//! Fixed-capacity vectors and matrices for dimensions 1 to 3.
//!
//! Everything here is `Copy` so the hot loops of the dual solver never
//! allocate.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::scalar::Real;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A vector in `R^d`, `1 <= d <= 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<T> {
    data: [T; MAX_DIM],
    dim: usize,
}

impl<T: Real> Vector<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { data: [T::zero(); MAX_DIM], dim }
    }

    /// Builds a vector from a slice of length 1..=3.
    pub fn from_slice(coords: &[T]) -> Self {
        let mut v = Self::zeros(coords.len());
        v.data[..coords.len()].copy_from_slice(coords);
        v
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize) -> T) -> Self {
        let mut v = Self::zeros(dim);
        for i in 0..dim {
            v.data[i] = f(i);
        }
        v
    }

    /// Unit vector along axis `k`.
    pub fn unit(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[k] = T::one();
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = T::zero();
        for i in 0..self.dim {
            s = s + self.data[i] * other.data[i];
        }
        s
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn distance_squared(&self, other: &Self) -> T {
        (*self - *other).norm_squared()
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        self.distance_squared(other).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out.data[i] = out.data[i] * s;
        }
        out
    }

    /// Outer product `self ⊗ other`.
    pub fn outer(&self, other: &Self) -> Matrix<T> {
        Matrix::from_fn(self.dim, |i, j| self.data[i] * other.data[j])
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.as_slice().iter().map(|v| v.as_f64()).collect()
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        debug_assert!(i < self.dim);
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        debug_assert!(i < self.dim);
        &mut self.data[i]
    }
}

impl<T: Real> Add for Vector<T> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Vector<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.data[i] = self.data[i] + rhs.data[i];
        }
    }
}

impl<T: Real> Sub for Vector<T> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real> SubAssign for Vector<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.data[i] = self.data[i] - rhs.data[i];
        }
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Serialize> Serialize for Vector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for v in &self.data[..self.dim] {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}

/// A square `d × d` matrix, `1 <= d <= 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<T> {
    data: [[T; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { data: [[T::zero(); MAX_DIM]; MAX_DIM], dim }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i][j] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.data[j][i])
    }

    pub fn mul_vec(&self, v: &Vector<T>) -> Vector<T> {
        Vector::from_fn(self.dim, |i| {
            (0..self.dim).fold(T::zero(), |s, j| s + self.data[i][j] * v[j])
        })
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| {
            (0..self.dim).fold(T::zero(), |s, k| s + self.data[i][k] * other.data[k][j])
        })
    }

    /// `self += w * (v ⊗ v)`
    #[inline]
    pub fn add_weighted_outer(&mut self, w: T, v: &Vector<T>) {
        for i in 0..self.dim {
            let wi = w * v[i];
            for j in 0..self.dim {
                self.data[i][j] = self.data[i][j] + wi * v[j];
            }
        }
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.data[i][j].abs());
            }
        }
        m
    }

    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.dim {
            for j in 0..i {
                m = m.max((self.data[i][j] - self.data[j][i]).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.data[i][j].is_finite()))
    }

    /// Sub-matrix obtained by dropping the first row and column.
    pub fn trailing_block(&self) -> Option<Self> {
        if self.dim < 2 {
            return None;
        }
        Some(Self::from_fn(self.dim - 1, |i, j| self.data[i + 1][j + 1]))
    }

    /// Cholesky factorisation of a symmetric positive definite matrix.
    /// Returns `None` when a pivot is not strictly positive.
    pub fn cholesky(&self) -> Option<Cholesky<T>> {
        let n = self.dim;
        let mut l = Self::zeros(n);
        let max_diag = (0..n).fold(T::zero(), |m, i| m.max(self.data[i][i].abs()));
        // pivots at round-off level relative to the diagonal mean singular
        let floor = max_diag * T::epsilon() * T::lit(64.0);
        for j in 0..n {
            let mut diag = self.data[j][j];
            for k in 0..j {
                diag = diag - l.data[j][k] * l.data[j][k];
            }
            if !(diag > floor) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l.data[j][j] = ljj;
            for i in (j + 1)..n {
                let mut s = self.data[i][j];
                for k in 0..j {
                    s = s - l.data[i][k] * l.data[j][k];
                }
                l.data[i][j] = s / ljj;
            }
        }
        Some(Cholesky { l })
    }

    /// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
    pub fn symmetric_eigenvalues(&self) -> Vector<T> {
        let n = self.dim;
        let mut a = *self;
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a.data[p][q] * a.data[p][q];
                }
            }
            let scale = a.max_abs();
            if off.sqrt() <= T::epsilon() * T::lit(1e-3) * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.data[p][q];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a.data[q][q] - a.data[p][p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.data[k][p];
                        let akq = a.data[k][q];
                        a.data[k][p] = c * akp - s * akq;
                        a.data[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.data[p][k];
                        let aqk = a.data[q][k];
                        a.data[p][k] = c * apk - s * aqk;
                        a.data[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<T> = (0..n).map(|i| a.data[i][i]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        Vector::from_slice(&eig)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.symmetric_eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> T {
        let e = self.symmetric_eigenvalues();
        e[e.dim() - 1]
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i][j].as_f64()).collect())
            .collect()
    }

    /// Householder reflection `I - 2 v vᵀ / |v|²` mapping the unit vector `u`
    /// onto the first axis. Identity when `u` already is the first axis.
    pub fn householder_to_first_axis(u: &Vector<T>) -> Self {
        let n = u.dim();
        let v = *u - Vector::unit(n, 0);
        let vv = v.norm_squared();
        if vv <= T::epsilon() * T::epsilon() {
            return Self::identity(n);
        }
        let two = T::lit(2.0);
        Self::from_fn(n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - two * v[i] * v[j] / vv
        })
    }
}

impl<T: Serialize> Serialize for Matrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for i in 0..self.dim {
            seq.serialize_element(&self.data[i][..self.dim])?;
        }
        seq.end()
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Copy, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let n = self.l.dim();
        let mut y = *b;
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l.get(i, k) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        let mut x = y;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l.get(k, i) * x[k];
            }
            x[i] = s / self.l.get(i, i);
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.l.dim();
        let mut inv = Matrix::zeros(n);
        for j in 0..n {
            let col = self.solve(&Vector::unit(n, j));
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.l
    }
}

/// Solves a general `n × n` system by Gaussian elimination with partial
/// pivoting. Returns `None` for a (numerically) singular matrix.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a: Matrix<f64> = Matrix::from_fn(3, |i, j| if i == j { 4.0 } else { 1.0 });
        let chol = a.cholesky().unwrap();
        let b = Vector::from_slice(&[1.0, 2.0, 3.0]);
        let x = chol.solve(&b);
        let back = a.mul_vec(&x);
        assert!((back - b).max_abs() < 1e-14);
        let inv = chol.inverse();
        let id = a.mul_mat(&inv);
        assert!((0..3).all(|i| (0..3).all(|j| {
            let e = if i == j { 1.0 } else { 0.0 };
            (id.get(i, j) - e).abs() < 1e-14
        })));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(a.cholesky().is_none());
        assert!(Matrix::<f64>::zeros(2).cholesky().is_none());
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a: Matrix<f64> = Matrix::from_fn(2, |i, j| if i == j { 2.0 } else { 1.0 });
        let e = a.symmetric_eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let d = Matrix::from_fn(3, |i, j| if i == j { [5.0, -1.0, 2.0][i] } else { 0.0 });
        assert_eq!(d.symmetric_eigenvalues().as_slice(), &[-1.0, 2.0, 5.0]);
    }

    #[test]
    fn householder_maps_direction_to_first_axis() {
        let u: Vector<f64> = Vector::from_slice(&[0.6, -0.8]);
        let q = Matrix::householder_to_first_axis(&u);
        let e = q.mul_vec(&u);
        assert!((e[0] - 1.0).abs() < 1e-15 && e[1].abs() < 1e-15);
        let qq = q.mul_mat(&q.transpose());
        assert!((qq.get(0, 0) - 1.0).abs() < 1e-15 && qq.get(0, 1).abs() < 1e-15);
        let u3: Vector<f64> = Vector::from_slice(&[-1.0, 0.0, 0.0]);
        let q3 = Matrix::householder_to_first_axis(&u3);
        assert!((q3.mul_vec(&u3)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_solver_handles_pivoting() {
        let x = solve_dense(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
        assert!(solve_dense(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).is_none());
    }
}
