//! Patch vectors `N(x)` and region second-moment matrices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::level_set::{heaviside_eps, LevelSet};
use crate::scalar::Real;
use crate::spd::{Matrix, SpdMatrix};

/// Absolute ridge added on top of the trace-relative one.
pub const RIDGE_FLOOR: f64 = 1e-10;

/// Minimum per-pixel weight for a region to count as non-empty.
pub const MIN_REGION_WEIGHT: f64 = 1e-12;

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T>(Grid<T>);

impl<T: Real> GrayImage<T> {
    pub fn new(grid: Grid<T>) -> Result<Self> {
        if let Some(v) = grid.as_slice().iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::InvalidParameter(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        Self::new(Grid::from_fn(width, height, f))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.0
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        *self.0.get(x, y)
    }

    pub fn map_intensity(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.0.map(|&v| f(v)))
    }
}

/// Per-pixel flattened `R × R` neighborhoods, row-major within each window.
#[derive(Clone, Debug)]
pub struct PatchField<T> {
    width: usize,
    height: usize,
    side: usize,
    data: Vec<T>,
}

impl<T: Real> PatchField<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Neighborhood side length `R`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Vector length `R²`.
    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> &[T] {
        self.vector_at(y * self.width + x)
    }

    #[inline]
    pub fn vector_at(&self, index: usize) -> &[T] {
        let n = self.dim();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn ensure_grid<U>(&self, grid: &Grid<U>) -> Result<()> {
        if grid.width() == self.width && grid.height() == self.height {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(self.width, self.height, grid.width(), grid.height()))
        }
    }
}

/// Extracts the `R × R` window around every pixel, with replicate padding at the border.
pub fn extract_patches<T: Real>(image: &GrayImage<T>, side: usize) -> Result<PatchField<T>> {
    let (w, h) = (image.width(), image.height());
    if side == 0 || side.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("neighborhood size {side} must be odd and positive")));
    }
    if side > w.min(h) {
        return Err(Error::InvalidParameter(format!("neighborhood size {side} exceeds image extent {w}x{h}")));
    }
    let n = side * side;
    let half = (side / 2) as isize;
    let grid = image.grid();
    let mut data = vec![T::zero(); w * h * n];
    data.par_chunks_mut(w * n).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let out = &mut row[x * n..(x + 1) * n];
            let mut k = 0;
            for dy in -half..=half {
                for dx in -half..=half {
                    out[k] = *grid.clamped(x as isize + dx, y as isize + dy);
                    k += 1;
                }
            }
        }
    });
    Ok(PatchField { width: w, height: h, side, data })
}

/// How pixels are assigned to the interior (`φ < 0`) and exterior regions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Membership<T> {
    /// `w_ext = H(φ)`, the exact step.
    Binary,
    /// `w_ext = H_ε(φ)`, the arctan-smoothed step.
    Smoothed(T),
}

impl<T: Real> Membership<T> {
    /// `(w_int, w_ext)` at level-set value `phi`.
    #[inline]
    pub fn weights(&self, phi: T) -> (T, T) {
        match *self {
            Membership::Binary => {
                if phi < T::zero() {
                    (T::one(), T::zero())
                } else {
                    (T::zero(), T::one())
                }
            }
            Membership::Smoothed(eps) => {
                let ext = heaviside_eps(phi, eps);
                (T::one() - ext, ext)
            }
        }
    }
}

/// Second-moment statistics of one region.
#[derive(Clone, Debug)]
pub struct RegionStats<T> {
    /// Regularized mean outer product, on `PD(R²)`.
    pub moment: SpdMatrix<T>,
    /// Unregularized weighted mean of `N Nᵀ`.
    pub raw: Matrix<T>,
    /// Ridge `ρ` added to the diagonal: `moment = raw + ρ I`.
    pub ridge: T,
    /// Sum of membership weights (pixels).
    pub area: T,
}

/// Interior and exterior moments `M^i`, `M^e` with their areas.
#[derive(Clone, Debug)]
pub struct RegionMoments<T> {
    pub interior: RegionStats<T>,
    pub exterior: RegionStats<T>,
    /// Relative ridge weight used to build both matrices.
    pub reg: T,
}

impl<T: Real> RegionMoments<T> {
    pub fn m_int(&self) -> &SpdMatrix<T> {
        &self.interior.moment
    }

    pub fn m_ext(&self) -> &SpdMatrix<T> {
        &self.exterior.moment
    }

    pub fn area_int(&self) -> T {
        self.interior.area
    }

    pub fn area_ext(&self) -> T {
        self.exterior.area
    }
}

// Packed upper triangle index for an n×n symmetric accumulator.
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn unpack<T: Real>(n: usize, packed: &[T], scale: T) -> Matrix<T> {
    let mut m = Matrix::zeros(n);
    let mut k = 0;
    for r in 0..n {
        for c in r..n {
            let v = packed[k] * scale;
            m[(r, c)] = v;
            m[(c, r)] = v;
            k += 1;
        }
    }
    m
}

struct Partial<T> {
    int: Vec<T>,
    ext: Vec<T>,
    w_int: T,
    w_ext: T,
    occupied_int: bool,
    occupied_ext: bool,
}

/// Accumulates `M^i`, `M^e` as membership-weighted means of `N(x) N(x)ᵀ`, then adds the
/// ridge `(reg · tr(M)/R² + 1e-10) I`. Fails with [`Error::Collapse`] if either region is empty.
pub fn region_second_moments<T: Real>(
    patches: &PatchField<T>,
    phi: &LevelSet<T>,
    membership: Membership<T>,
    reg: T,
) -> Result<RegionMoments<T>> {
    patches.ensure_grid(phi.grid())?;
    if !(reg >= T::zero()) {
        return Err(Error::InvalidParameter(format!("regularization {reg} must be nonnegative")));
    }
    let n = patches.dim();
    let w = patches.width();
    let plen = packed_len(n);
    let min_w = T::lit(MIN_REGION_WEIGHT);

    // Fixed row partition and in-order sum: identical results for any thread count.
    let partials: Vec<Partial<T>> = (0..patches.height())
        .into_par_iter()
        .map(|y| {
            let mut p = Partial {
                int: vec![T::zero(); plen],
                ext: vec![T::zero(); plen],
                w_int: T::zero(),
                w_ext: T::zero(),
                occupied_int: false,
                occupied_ext: false,
            };
            for x in 0..w {
                let (wi, we) = membership.weights(*phi.get(x, y));
                p.w_int = p.w_int + wi;
                p.w_ext = p.w_ext + we;
                p.occupied_int |= wi > min_w;
                p.occupied_ext |= we > min_w;
                let v = patches.vector(x, y);
                let mut k = 0;
                for r in 0..n {
                    let (ai, ae) = (wi * v[r], we * v[r]);
                    for &vc in &v[r..] {
                        p.int[k] = p.int[k] + ai * vc;
                        p.ext[k] = p.ext[k] + ae * vc;
                        k += 1;
                    }
                }
            }
            p
        })
        .collect();

    let mut total = Partial {
        int: vec![T::zero(); plen],
        ext: vec![T::zero(); plen],
        w_int: T::zero(),
        w_ext: T::zero(),
        occupied_int: false,
        occupied_ext: false,
    };
    for p in &partials {
        for (acc, &v) in total.int.iter_mut().zip(&p.int) {
            *acc = *acc + v;
        }
        for (acc, &v) in total.ext.iter_mut().zip(&p.ext) {
            *acc = *acc + v;
        }
        total.w_int = total.w_int + p.w_int;
        total.w_ext = total.w_ext + p.w_ext;
        total.occupied_int |= p.occupied_int;
        total.occupied_ext |= p.occupied_ext;
    }
    if !total.occupied_int {
        return Err(Error::Collapse("interior"));
    }
    if !total.occupied_ext {
        return Err(Error::Collapse("exterior"));
    }

    let finish = |packed: &[T], area: T| -> Result<RegionStats<T>> {
        let raw = unpack(n, packed, area.recip());
        let ridge = reg * raw.trace() / T::from_count(n) + T::lit(RIDGE_FLOOR);
        let mut m = raw.clone();
        for i in 0..n {
            m[(i, i)] = m[(i, i)] + ridge;
        }
        Ok(RegionStats { moment: SpdMatrix::new(m)?, raw, ridge, area })
    };
    Ok(RegionMoments { interior: finish(&total.int, total.w_int)?, exterior: finish(&total.ext, total.w_ext)?, reg })
}
