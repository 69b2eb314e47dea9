use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense square matrix, row-major. Small (at most a few dozen rows) by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds from `n*n` row-major values.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self { n, data }
    }

    /// `v vᵀ`
    pub fn outer(v: &[T]) -> Self {
        Self::from_fn(v.len(), |r, c| v[r] * v[c])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |r, c| self[(c, r)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&v| v * s).collect() }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// `tr(selfᵀ other)`
    pub fn frobenius_dot(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    /// `vᵀ self v`
    pub fn quadratic_form(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.n);
        let mut acc = T::zero();
        for (r, &vr) in v.iter().enumerate() {
            let row = &self.data[r * self.n..(r + 1) * self.n];
            let mut dot = T::zero();
            for (&a, &vc) in row.iter().zip(v) {
                dot = dot + a * vc;
            }
            acc = acc + vr * dot;
        }
        acc
    }

    /// Averages with the transpose, removing rounding asymmetry from products of symmetric factors.
    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |r, c| (self[(r, c)] + self[(c, r)]) * half)
    }

    /// Largest symmetry violation `(row, col, gap)` exceeding `tol · (1 + |a[row,col]|)`, if any.
    pub fn symmetry_violation(&self, tol: T) -> Option<(usize, usize, T)> {
        for r in 0..self.n {
            for c in (r + 1)..self.n {
                let a = self[(r, c)];
                let gap = (a - self[(c, r)]).abs();
                if !(gap <= tol * (T::one() + a.abs())) {
                    return Some((r, c, gap));
                }
            }
        }
        None
    }

    pub fn ensure_symmetric(&self) -> Result<()> {
        match self.symmetry_violation(T::sym_tol()) {
            None => Ok(()),
            Some((row, col, gap)) => Err(Error::NotSymmetric { row, col, gap: gap.to_f64_lossy() }),
        }
    }

    pub fn ensure_dim(&self, n: usize) -> Result<()> {
        if self.n == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, got: self.n })
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == T::zero() {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] = out.data[r * n + c] + a * other.data[k * n + c];
                }
            }
        }
        out
    }

    /// `self · middle · self`, symmetrized. Used for congruences by symmetric factors.
    pub fn sandwich(&self, middle: &Self) -> Self {
        self.matmul(middle).matmul(self).symmetrized()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.n + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.n + c]
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.n, rhs.n, "add dimension mismatch");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.n, rhs.n, "sub dimension mismatch");
        Matrix { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}
