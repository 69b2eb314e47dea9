//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::matrix::Matrix;
use crate::error::Result;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `A = Q diag(values) Qᵀ` with eigenvalues ascending and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEigen<T> {
    /// `Q diag(f(w)) Qᵀ`
    pub fn reconstruct_with(&self, mut f: impl FnMut(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let fw: Vec<T> = self.values.iter().map(|&w| f(w)).collect();
        let q = &self.vectors;
        let mut out = Matrix::zeros(n);
        for r in 0..n {
            for c in r..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + q[(r, k)] * fw[k] * q[(c, k)];
                }
                out[(r, c)] = acc;
                out[(c, r)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.reconstruct_with(|w| w)
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

/// Symmetric eigendecomposition. Rejects inputs that are not symmetric within tolerance.
pub fn sym_eig<T: Real>(a: &Matrix<T>) -> Result<SymEigen<T>> {
    a.ensure_symmetric()?;
    Ok(sym_eig_unchecked(&a.symmetrized()))
}

/// Jacobi sweeps on an input already known to be symmetric.
///
/// A rotation is skipped once `|a_pq| <= eps * sqrt(|a_pp a_qq|)`, and diagonal
/// entries are updated through `t * a_pq`. On positive definite input this keeps
/// small eigenvalues accurate relative to their own size, not to the norm.
pub(crate) fn sym_eig_unchecked<T: Real>(a: &Matrix<T>) -> SymEigen<T> {
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let (app, aqq) = (m[(p, p)], m[(q, q)]);
                if apq.abs() <= eps * (app * aqq).abs().sqrt() || apq.abs() <= tiny {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (two * apq);
                let t = if theta.abs() > T::lit(1e150).min(T::max_value().sqrt()) {
                    T::one() / (two * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    let np = c * mkp - s * mkq;
                    let nq = s * mkp + c * mkq;
                    m[(k, p)] = np;
                    m[(p, k)] = np;
                    m[(k, q)] = nq;
                    m[(q, k)] = nq;
                }
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, |r, c| v[(r, order[c])]);
    SymEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let qtq = e.vectors.transpose().matmul(&e.vectors);
        assert!((&qtq - &Matrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn diagonal_is_axis_aligned() {
        let a = Matrix::from_diag(&[9.0f64, 4.0]);
        let e = sym_eig(&a).unwrap();
        assert_eq!(e.values, vec![4.0, 9.0]);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = Matrix::from_rows(&[&[1.0f64, 2.0], &[2.1, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(crate::Error::NotSymmetric { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::from_rows(&[&[2.0f32, 1.0], &[1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-6);
        assert!((e.values[1] - 3.0).abs() < 1e-6);
    }
}
