//! The manifold `PD(n)` of symmetric positive definite matrices under the
//! affine-invariant metric `⟨X, Y⟩_M = tr(M⁻¹ X M⁻¹ Y)`.
//!
//! All operations are pure; the only shared state is an atomic counter of
//! conditioning-guard activations.

mod eigen;
mod matrix;

use std::sync::atomic::{AtomicUsize, Ordering};

pub use eigen::{sym_eig, SymEigen};
pub use matrix::Matrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues below `CONDITION_FLOOR · λ_max` are lifted to that floor before a matrix log.
pub const CONDITION_FLOOR: f64 = 1e-12;

static CLAMP_EVENTS: AtomicUsize = AtomicUsize::new(0);

/// Number of times the conditioning guard has clamped an eigenvalue in this process.
pub fn conditioning_clamp_count() -> usize {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

/// A symmetric positive definite matrix together with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpdMatrix<T> {
    mat: Matrix<T>,
    eig: SymEigen<T>,
}

impl<T: Real> SpdMatrix<T> {
    /// Validates symmetry and positive definiteness.
    pub fn new(mat: Matrix<T>) -> Result<Self> {
        let eig = sym_eig(&mat)?;
        if !(eig.min_value() > T::zero()) {
            return Err(Error::NotPositiveDefinite { min_eig: eig.min_value().to_f64_lossy() });
        }
        Ok(Self { mat: mat.symmetrized(), eig })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n)).expect("identity is SPD")
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        Self::new(Matrix::from_diag(diag))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.mat
    }

    #[inline]
    pub fn eigen(&self) -> &SymEigen<T> {
        &self.eig
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.mat
    }

    pub fn sqrt(&self) -> Matrix<T> {
        self.eig.reconstruct_with(|w| w.sqrt())
    }

    pub fn inv_sqrt(&self) -> Matrix<T> {
        self.eig.reconstruct_with(|w| w.sqrt().recip())
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.eig.reconstruct_with(|w| w.recip())
    }

    pub fn inverse_spd(&self) -> SpdMatrix<T> {
        SpdMatrix {
            mat: self.inverse(),
            eig: SymEigen {
                values: self.eig.values.iter().rev().map(|w| w.recip()).collect(),
                vectors: Matrix::from_fn(self.dim(), |r, c| self.eig.vectors[(r, self.dim() - 1 - c)]),
            },
        }
    }

    /// `P A Pᵀ` for any square `P` of matching dimension.
    pub fn congruence(&self, p: &Matrix<T>) -> Result<SpdMatrix<T>> {
        p.ensure_dim(self.dim())?;
        SpdMatrix::new(p.matmul(&self.mat).matmul(&p.transpose()).symmetrized())
    }
}

/// Symmetric tangent vector at some basepoint of `PD(n)`. The basepoint is
/// not stored; operations that need it take it explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentMatrix<T>(Matrix<T>);

impl<T: Real> TangentMatrix<T> {
    pub fn new(mat: Matrix<T>) -> Result<Self> {
        mat.ensure_symmetric()?;
        Ok(Self(mat.symmetrized()))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.scale(s))
    }
}

/// Applies `f` to the eigenvalues: `Q diag(f(w)) Qᵀ`. Fails if `f` leaves its domain.
pub fn spd_function<T: Real>(a: &SpdMatrix<T>, f: impl Fn(T) -> T) -> Result<Matrix<T>> {
    for &w in &a.eig.values {
        let fw = f(w);
        if !fw.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eig: w.to_f64_lossy() });
        }
    }
    Ok(a.eig.reconstruct_with(f))
}

/// Matrix logarithm of an SPD matrix.
pub fn spd_log<T: Real>(a: &SpdMatrix<T>) -> Result<Matrix<T>> {
    spd_function(a, |w| w.ln())
}

/// Matrix exponential of a symmetric matrix (always SPD).
pub fn sym_exp<T: Real>(x: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(sym_eig(x)?.reconstruct_with(|w| w.exp()))
}

/// `Q diag(f(λ))` for the eigenpairs of `a`.
fn scaled_basis<T: Real>(a: &SpdMatrix<T>, f: impl Fn(T) -> T) -> Matrix<T> {
    let q = &a.eig.vectors;
    let w: Vec<T> = a.eig.values.iter().map(|&l| f(l)).collect();
    Matrix::from_fn(a.dim(), |r, c| q[(r, c)] * w[c])
}

/// `Fᵀ M F`, symmetrized.
fn pullback<T: Real>(f: &Matrix<T>, m: &Matrix<T>) -> Matrix<T> {
    f.transpose().matmul(&m.matmul(f)).symmetrized()
}

/// `F M Fᵀ`, symmetrized.
fn pushforward<T: Real>(f: &Matrix<T>, m: &Matrix<T>) -> Matrix<T> {
    f.matmul(&m.matmul(&f.transpose())).symmetrized()
}

/// Whitens `b` in the eigenbasis of `a`: `C = Λ^{-1/2} Qᵀ B Q Λ^{-1/2}`, which is
/// similar to `A^{-1/2} B A^{-1/2}` and keeps the diagonal scaling explicit.
/// Returns the guarded spectrum of `C`.
fn whitened<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<SymEigen<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let c = pullback(&scaled_basis(a, |l| l.sqrt().recip()), b.matrix());
    let mut eig = eigen::sym_eig_unchecked(&c);
    guard_spectrum(&mut eig.values)?;
    Ok(eig)
}

fn guard_spectrum<T: Real>(values: &mut [T]) -> Result<()> {
    let top = values.iter().copied().fold(T::zero(), T::max);
    if !(top > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eig: top.to_f64_lossy() });
    }
    let floor = top * T::lit(CONDITION_FLOOR);
    let mut clamped = false;
    for w in values.iter_mut() {
        if !(*w >= floor) {
            *w = floor;
            clamped = true;
        }
    }
    if clamped {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        log::warn!("conditioning guard clamped eigenvalues to {:e}", floor.to_f64_lossy());
    }
    Ok(())
}

/// Affine-invariant geodesic distance `‖log(A^{-1/2} B A^{-1/2})‖_F`.
///
/// The pair is whitened in a fixed order (lexicographic on entries), so the
/// result is exactly symmetric in its arguments.
pub fn geodesic_distance<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T> {
    let swap = a
        .mat
        .as_slice()
        .iter()
        .zip(b.mat.as_slice())
        .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
        .is_some_and(|o| o.is_gt());
    let (a, b) = if swap { (b, a) } else { (a, b) };
    let eig = whitened(a, b)?;
    Ok(eig.values.iter().map(|&w| w.ln() * w.ln()).sum::<T>().sqrt())
}

/// Riemannian log map `Log_A(B) = A^{1/2} log(A^{-1/2} B A^{-1/2}) A^{1/2}`.
pub fn riemannian_log<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<TangentMatrix<T>> {
    let eig = whitened(a, b)?;
    let log_c = eig.reconstruct_with(|w| w.ln());
    Ok(TangentMatrix(pushforward(&scaled_basis(a, |l| l.sqrt()), &log_c)))
}

/// Riemannian exp map `Exp_A(X) = A^{1/2} exp(A^{-1/2} X A^{-1/2}) A^{1/2}`.
pub fn riemannian_exp<T: Real>(a: &SpdMatrix<T>, x: &TangentMatrix<T>) -> Result<SpdMatrix<T>> {
    x.matrix().ensure_dim(a.dim())?;
    let inner = pullback(&scaled_basis(a, |l| l.sqrt().recip()), x.matrix());
    let e = eigen::sym_eig_unchecked(&inner).reconstruct_with(|w| w.exp());
    SpdMatrix::new(pushforward(&scaled_basis(a, |l| l.sqrt()), &e))
}

/// `⟨X, Y⟩_M = tr(M⁻¹ X M⁻¹ Y)`
pub fn inner_product<T: Real>(m: &SpdMatrix<T>, x: &TangentMatrix<T>, y: &TangentMatrix<T>) -> Result<T> {
    x.matrix().ensure_dim(m.dim())?;
    y.matrix().ensure_dim(m.dim())?;
    let inv = m.inverse();
    let left = inv.matmul(x.matrix());
    let right = inv.matmul(y.matrix());
    // tr(P Q) = Σ P[r,c] Q[c,r]
    Ok(left.frobenius_dot(&right.transpose()))
}
