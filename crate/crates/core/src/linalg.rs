//! Dense row-major matrices and a column-pivoted Householder QR.
//!
//! Every least-squares solve in the crate (OLS, the weighted steps of IRLS,
//! and the covariance matrices derived from them) goes through
//! [`PivotedQr`]. Column pivoting makes the numerical rank visible, so
//! collinear designs are reported by column instead of producing garbage.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from equal-length rows.
    ///
    /// # Panics
    /// If the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() }
    }

    pub fn from_columns(columns: &[Vec<T>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn transpose_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Multiplies row `i` by `w[i]`.
    pub fn scale_rows(&self, w: &[T]) -> Self {
        assert_eq!(w.len(), self.rows, "dimension mismatch");
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * w[i])
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Householder QR of an `m × n` matrix (`m ≥ n`) with greedy column pivoting:
/// `A P = Q R`.
#[derive(Debug, Clone)]
pub struct PivotedQr<T> {
    /// Upper triangle holds R (in pivoted column order).
    r: Matrix<T>,
    reflectors: Vec<Vec<T>>,
    perm: Vec<usize>,
    rank: usize,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut r = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut reflectors = Vec::with_capacity(n.min(m));
        let steps = n.min(m);

        for k in 0..steps {
            // Pivot: remaining column with the largest trailing norm.
            let trailing_norm2 = |r: &Matrix<T>, j: usize| -> T {
                (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<T>()
            };
            let mut best = k;
            let mut best_norm = trailing_norm2(&r, k);
            for j in k + 1..n {
                let nj = trailing_norm2(&r, j);
                if nj > best_norm {
                    best = j;
                    best_norm = nj;
                }
            }
            if best != k {
                for i in 0..m {
                    r.data.swap(i * n + k, i * n + best);
                }
                perm.swap(k, best);
            }

            let norm = best_norm.sqrt();
            let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
            if norm == T::zero() {
                reflectors.push(vec![T::zero(); m - k]);
                continue;
            }
            let alpha = if v[0] >= T::zero() { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2 = dot(&v, &v);
            if vnorm2 > T::zero() {
                let two = T::of(2.0);
                for j in k..n {
                    let s: T = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<T>() * two / vnorm2;
                    for i in k..m {
                        r[(i, j)] -= s * v[i - k];
                    }
                }
            }
            r[(k, k)] = alpha;
            for i in k + 1..m {
                r[(i, k)] = T::zero();
            }
            reflectors.push(v);
        }

        let tol = T::epsilon() * T::of_usize(m.max(n).max(1)) * T::of(10.0);
        let r00 = if steps > 0 { r[(0, 0)].abs() } else { T::zero() };
        let rank = (0..steps).take_while(|&k| r00 > T::zero() && r[(k, k)].abs() > tol * r00).count();

        Self { r, reflectors, perm, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.r.cols()
    }

    /// Original column indices that fell beyond the numerical rank.
    pub fn dependent_columns(&self) -> Vec<usize> {
        let mut cols = self.perm[self.rank..].to_vec();
        cols.sort_unstable();
        cols
    }

    /// Computes `Qᵀ y`.
    pub fn qt_mul(&self, y: &[T]) -> Vec<T> {
        let m = self.r.rows();
        assert_eq!(y.len(), m, "dimension mismatch");
        let mut c = y.to_vec();
        for (k, v) in self.reflectors.iter().enumerate() {
            let vnorm2 = dot(v, v);
            if vnorm2 == T::zero() {
                continue;
            }
            let s = dot(v, &c[k..]) * T::of(2.0) / vnorm2;
            for (ci, &vi) in c[k..].iter_mut().zip(v) {
                *ci -= s * vi;
            }
        }
        c
    }

    /// Least-squares solution of `A x ≈ y`; requires full column rank.
    pub fn solve(&self, y: &[T]) -> Vec<T> {
        assert!(self.is_full_rank(), "solve on rank-deficient QR");
        let n = self.r.cols();
        let c = self.qt_mul(y);
        let mut z = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = c[i];
            for j in i + 1..n {
                s -= self.r[(i, j)] * z[j];
            }
            z[i] = s / self.r[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// `(AᵀA)⁻¹` in the original column order, exactly symmetric.
    pub fn inverse_gram(&self) -> Matrix<T> {
        assert!(self.is_full_rank(), "inverse_gram on rank-deficient QR");
        let n = self.r.cols();
        // R⁻¹ by back substitution, column by column.
        let mut rinv = Matrix::zeros(n, n);
        for j in 0..n {
            rinv[(j, j)] = T::one() / self.r[(j, j)];
            for i in (0..j).rev() {
                let mut s = T::zero();
                for k in i + 1..=j {
                    s += self.r[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = -s / self.r[(i, i)];
            }
        }
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for k in j..n {
                    s += rinv[(i, k)] * rinv[(j, k)];
                }
                let (pi, pj) = (self.perm[i], self.perm[j]);
                out[(pi, pj)] = s;
                out[(pj, pi)] = s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        let a = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let qr = PivotedQr::new(&a);
        let x = qr.solve(&[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn inverse_gram_matches_explicit_inverse() {
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let inv = PivotedQr::new(&a).inverse_gram();
        // AᵀA = [[3,3],[3,5]], inverse = [[5,-3],[-3,3]]/6
        assert!((inv[(0, 0)] - 5.0 / 6.0).abs() < 1e-12);
        assert!((inv[(0, 1)] + 0.5).abs() < 1e-12);
        assert!((inv[(1, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(inv.max_asymmetry(), 0.0);
    }

    #[test]
    fn detects_collinear_column() {
        let a = Matrix::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 2.0, 4.0],
            vec![1.0, 3.0, 6.0],
            vec![1.0, 4.0, 8.0],
        ]);
        let qr = PivotedQr::new(&a);
        assert_eq!(qr.rank(), 2);
        assert_eq!(qr.dependent_columns().len(), 1);
        let dep = qr.dependent_columns()[0];
        assert!(dep == 1 || dep == 2);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::<f32>::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let x = PivotedQr::new(&a).solve(&[1.0, 3.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-5);
        assert!((x[1] - 2.0).abs() < 1e-5);
    }
}
