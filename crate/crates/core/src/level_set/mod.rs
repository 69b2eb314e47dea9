//! Level-set fields: signed-distance initialization, smoothed Heaviside and
//! Dirac, curvature, Sussman reinitialization and zero-contour extraction.
//!
//! Sign convention: interior pixels have `φ < 0`, exterior pixels `φ ≥ 0`.

mod contour;

use std::ops::{Deref, DerefMut};

use rayon::prelude::*;

pub use contour::{zero_contour, Polyline};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::scalar::Real;

/// Floor on `|∇φ|` in the curvature denominator.
pub const GRADIENT_FLOOR: f64 = 1e-8;

/// Scalar field `φ` on the pixel grid, in pixel-distance units.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSet<T>(Grid<T>);

impl<T: Real> LevelSet<T> {
    pub fn new(grid: Grid<T>) -> Result<Self> {
        if grid.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("level set contains non-finite values".into()));
        }
        Ok(Self(grid))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> T) -> Self {
        Self(Grid::from_fn(width, height, f))
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<T> {
        self.0
    }

    /// Interior mask `φ < 0`.
    pub fn interior_mask(&self) -> Mask {
        self.0.map(|&v| v < T::zero())
    }

    pub fn has_both_signs(&self) -> bool {
        let s = self.0.as_slice();
        s.iter().any(|&v| v < T::zero()) && s.iter().any(|&v| v >= T::zero())
    }

    pub fn negated(&self) -> Self {
        Self(self.0.map(|&v| -v))
    }
}

impl<T> Deref for LevelSet<T> {
    type Target = Grid<T>;
    fn deref(&self) -> &Grid<T> {
        &self.0
    }
}

impl<T> DerefMut for LevelSet<T> {
    fn deref_mut(&mut self) -> &mut Grid<T> {
        &mut self.0
    }
}

/// Initial contour shapes, in pixel coordinates (pixel `(x, y)` is centered at `(x, y)`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Circle { cx: f64, cy: f64, r: f64 },
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Equal circles of radius `r` on a square lattice with the given spacing.
    MultiCircle { spacing: f64, r: f64 },
}

const SHAPE_MARGIN: f64 = 2.0;

impl Shape {
    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (w, h) = ((width - 1) as f64, (height - 1) as f64);
        let inside = |x0: f64, y0: f64, x1: f64, y1: f64| {
            x0 >= SHAPE_MARGIN && y0 >= SHAPE_MARGIN && x1 <= w - SHAPE_MARGIN && y1 <= h - SHAPE_MARGIN
        };
        match *self {
            Shape::Circle { cx, cy, r } => {
                if !(r > 0.0) {
                    return Err(Error::InvalidShape(format!("circle radius {r} must be positive")));
                }
                if !inside(cx - r, cy - r, cx + r, cy + r) {
                    return Err(Error::InvalidShape("circle does not fit inside the grid margin".into()));
                }
            }
            Shape::Rectangle { x0, y0, x1, y1 } => {
                if !(x1 > x0 && y1 > y0) {
                    return Err(Error::InvalidShape("empty rectangle".into()));
                }
                if !inside(x0, y0, x1, y1) {
                    return Err(Error::InvalidShape("rectangle does not fit inside the grid margin".into()));
                }
            }
            Shape::MultiCircle { spacing, r } => {
                if !(r > 0.0) || !(spacing > 2.0 * r) {
                    return Err(Error::InvalidShape(format!(
                        "multi-circle needs 0 < 2r < spacing (r = {r}, spacing = {spacing})"
                    )));
                }
                if self.lattice_centers(width, height).is_empty() {
                    return Err(Error::InvalidShape("no lattice circle fits inside the grid".into()));
                }
            }
        }
        Ok(())
    }

    fn lattice_centers(&self, width: usize, height: usize) -> Vec<(f64, f64)> {
        let Shape::MultiCircle { spacing, r } = *self else {
            return Vec::new();
        };
        let axis = |len: usize| {
            let hi = (len - 1) as f64 - SHAPE_MARGIN - r;
            let mut out = Vec::new();
            let mut c = spacing / 2.0;
            while c <= hi {
                if c - r >= SHAPE_MARGIN {
                    out.push(c);
                }
                c += spacing;
            }
            out
        };
        let xs = axis(width);
        let ys = axis(height);
        ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect()
    }

    /// Exact signed distance to the shape boundary at point `(x, y)`, negative inside.
    pub fn signed_distance(&self, x: f64, y: f64, centers: &[(f64, f64)]) -> f64 {
        match *self {
            Shape::Circle { cx, cy, r } => (x - cx).hypot(y - cy) - r,
            Shape::Rectangle { x0, y0, x1, y1 } => {
                let qx = (x - 0.5 * (x0 + x1)).abs() - 0.5 * (x1 - x0);
                let qy = (y - 0.5 * (y0 + y1)).abs() - 0.5 * (y1 - y0);
                qx.max(0.0).hypot(qy.max(0.0)) + qx.max(qy).min(0.0)
            }
            Shape::MultiCircle { r, .. } => centers
                .iter()
                .map(|&(cx, cy)| (x - cx).hypot(y - cy) - r)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Signed distance function of `shape` on a `width × height` grid.
pub fn init_signed_distance<T: Real>(shape: &Shape, width: usize, height: usize) -> Result<LevelSet<T>> {
    if width < 3 || height < 3 {
        return Err(Error::InvalidShape(format!("grid {width}x{height} too small")));
    }
    shape.validate(width, height)?;
    let centers = shape.lattice_centers(width, height);
    Ok(LevelSet::from_fn(width, height, |x, y| T::lit(shape.signed_distance(x as f64, y as f64, &centers))))
}

/// `H_ε(φ) = ½(1 + (2/π) atan(φ/ε))`
#[inline]
pub fn heaviside_eps<T: Real>(phi: T, eps: T) -> T {
    T::lit(0.5) * (T::one() + T::FRAC_2_PI() * (phi / eps).atan())
}

/// `δ_ε(φ) = (1/π) ε / (ε² + φ²)`, the derivative of [`heaviside_eps`].
#[inline]
pub fn dirac_eps<T: Real>(phi: T, eps: T) -> T {
    T::FRAC_1_PI() * eps / (eps * eps + phi * phi)
}

/// First derivative along one axis of a line of samples: central inside, one-sided at the ends.
#[inline]
fn d1<T: Real>(f: impl Fn(usize) -> T, i: usize, len: usize) -> T {
    if i == 0 {
        f(1) - f(0)
    } else if i == len - 1 {
        f(len - 1) - f(len - 2)
    } else {
        (f(i + 1) - f(i - 1)) * T::lit(0.5)
    }
}

/// Second derivative: centered inside, one-sided three-point stencil at the ends.
#[inline]
fn d2<T: Real>(f: impl Fn(usize) -> T, i: usize, len: usize) -> T {
    let two = T::lit(2.0);
    if i == 0 {
        f(0) - two * f(1) + f(2)
    } else if i == len - 1 {
        f(len - 1) - two * f(len - 2) + f(len - 3)
    } else {
        f(i + 1) - two * f(i) + f(i - 1)
    }
}

/// Central-difference gradient `(φ_x, φ_y)` with one-sided differences on the border.
pub fn gradient<T: Real>(phi: &Grid<T>) -> (Grid<T>, Grid<T>) {
    let (w, h) = (phi.width(), phi.height());
    let gx = Grid::from_fn(w, h, |x, y| d1(|i| *phi.get(i, y), x, w));
    let gy = Grid::from_fn(w, h, |x, y| d1(|j| *phi.get(x, j), y, h));
    (gx, gy)
}

/// Central-difference `|∇φ|`.
pub fn gradient_magnitude<T: Real>(phi: &Grid<T>) -> Grid<T> {
    let (gx, gy) = gradient(phi);
    Grid::from_fn(phi.width(), phi.height(), |x, y| gx.get(x, y).hypot(*gy.get(x, y)))
}

/// Mean curvature `κ = div(∇φ/|∇φ|)` of the level sets of `φ`, clamped to `[-2, 2]`
/// (a one-pixel disk is the smallest resolvable shape; kinks such as the center of a
/// distance field would otherwise dominate an adaptive time step).
pub fn curvature<T: Real>(phi: &Grid<T>) -> Result<Grid<T>> {
    let (w, h) = (phi.width(), phi.height());
    if w < 3 || h < 3 {
        return Err(Error::InvalidParameter(format!("curvature needs a grid of at least 3x3, got {w}x{h}")));
    }
    let (gx, gy) = gradient(phi);
    let floor = T::lit(GRADIENT_FLOOR);
    let two = T::lit(2.0);
    let mut out = Grid::filled(w, h, T::zero());
    out.as_mut_slice().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, k) in row.iter_mut().enumerate() {
            let px = *gx.get(x, y);
            let py = *gy.get(x, y);
            let pxx = d2(|i| *phi.get(i, y), x, w);
            let pyy = d2(|j| *phi.get(x, j), y, h);
            let pxy = d1(|j| *gx.get(x, j), y, h);
            let norm = px.hypot(py).max(floor);
            let raw = (pxx * py * py - two * px * py * pxy + pyy * px * px) / (norm * norm * norm);
            *k = raw.max(-two).min(two);
        }
    });
    Ok(out)
}

#[inline]
fn minmod<T: Real>(a: T, b: T) -> T {
    if a * b <= T::zero() {
        T::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Sample of a line extended linearly past both ends.
#[inline]
fn extrapolated<T: Real>(f: impl Fn(usize) -> T, len: usize, i: isize) -> T {
    if i < 0 {
        let f0 = f(0);
        f0 + T::from_count((-i) as usize) * (f0 - f(1))
    } else if i as usize >= len {
        let last = f(len - 1);
        last + T::from_count(i as usize - len + 1) * (last - f(len - 2))
    } else {
        f(i as usize)
    }
}

/// Second-order ENO one-sided differences `(D⁻, D⁺)` at index `i` of a line.
#[inline]
fn eno2<T: Real>(f: impl Fn(isize) -> T, i: isize) -> (T, T) {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let dd = |k: isize| f(k + 1) - two * f(k) + f(k - 1);
    let minus = f(i) - f(i - 1) + half * minmod(dd(i - 1), dd(i));
    let plus = f(i + 1) - f(i) - half * minmod(dd(i), dd(i + 1));
    (minus, plus)
}

/// Godunov upwind `|∇φ|` for the eikonal flow with sign `s`.
#[inline]
fn godunov_norm<T: Real>(s: T, (ax, bx): (T, T), (ay, by): (T, T)) -> T {
    let zero = T::zero();
    let sq = |v: T| v * v;
    let (gx, gy) = if s > zero {
        (sq(ax.max(zero)).max(sq(bx.min(zero))), sq(ay.max(zero)).max(sq(by.min(zero))))
    } else {
        (sq(ax.min(zero)).max(sq(bx.max(zero))), sq(ay.min(zero)).max(sq(by.max(zero))))
    };
    (gx + gy).sqrt()
}

/// Subcell distance estimate `φ₀ / |∇φ₀|` for pixels with a 4-neighbor of opposite sign.
fn interface_anchors<T: Real>(phi0: &Grid<T>) -> Vec<Option<T>> {
    let (w, h) = (phi0.width(), phi0.height());
    let at = |x: usize, y: usize| *phi0.get(x, y);
    let mut out = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = at(x, y);
            let mut neighbors = [None; 4];
            if x > 0 {
                neighbors[0] = Some(at(x - 1, y));
            }
            if x + 1 < w {
                neighbors[1] = Some(at(x + 1, y));
            }
            if y > 0 {
                neighbors[2] = Some(at(x, y - 1));
            }
            if y + 1 < h {
                neighbors[3] = Some(at(x, y + 1));
            }
            let crosses = neighbors.iter().flatten().any(|&q| (p < T::zero()) != (q < T::zero()));
            if !crosses {
                continue;
            }
            let side = |a: Option<T>, b: Option<T>| match (a, b) {
                (Some(a), Some(b)) => ((b - a) * T::lit(0.5), (p - a).abs().max((b - p).abs())),
                (Some(a), None) => (p - a, (p - a).abs()),
                (None, Some(b)) => (b - p, (b - p).abs()),
                (None, None) => (T::zero(), T::zero()),
            };
            let (cx, ox) = side(neighbors[0], neighbors[1]);
            let (cy, oy) = side(neighbors[2], neighbors[3]);
            let slope = cx.hypot(cy).max(ox).max(oy).max(T::lit(1e-12));
            out[y * w + x] = Some(p / slope);
        }
    }
    out
}

/// Sussman reinitialization: iterates `φ_t = S(φ₀)(1 − |∇φ|)` with the smoothed sign
/// `S(φ₀) = φ₀ / sqrt(φ₀² + 1)` and a Godunov upwind (ENO2) gradient. Pixels touching
/// the zero set are relaxed toward their subcell distance `φ₀/|∇φ₀|` instead, which pins
/// the interface (Russo–Smereka).
pub fn reinitialize<T: Real>(phi: &LevelSet<T>, iterations: usize, dt: T) -> Result<LevelSet<T>> {
    if !(dt > T::zero() && dt <= T::lit(0.5)) {
        return Err(Error::InvalidParameter(format!("reinitialization dt {dt} violates 0 < dt <= 0.5")));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("reinitialization needs at least one iteration".into()));
    }
    let (w, h) = (phi.width(), phi.height());
    let sign: Vec<T> = phi.as_slice().iter().map(|&p| p / (p * p + T::one()).sqrt()).collect();
    let anchors = interface_anchors(phi.grid());
    let mut cur = phi.0.clone();
    let mut next = cur.clone();
    for _ in 0..iterations {
        let src = &cur;
        next.as_mut_slice().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let v = *src.get(x, y);
                if let Some(d) = anchors[i] {
                    let s = if phi.as_slice()[i] < T::zero() { -T::one() } else { T::one() };
                    *out = v - dt * (s * v.abs() - d);
                    continue;
                }
                let s = sign[i];
                if s == T::zero() {
                    *out = v;
                    continue;
                }
                let dx = eno2(|i| extrapolated(|k| *src.get(k, y), w, i), x as isize);
                let dy = eno2(|j| extrapolated(|k| *src.get(x, k), h, j), y as isize);
                let g = godunov_norm(s, dx, dy);
                *out = v + dt * s * (T::one() - g);
            }
        });
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(LevelSet(cur))
}

/// Pixels within `band` of the zero set, estimated as `|φ| ≤ band`.
pub fn band_mask<T: Real>(phi: &Grid<T>, band: T) -> Mask {
    phi.map(|&v| v.abs() <= band)
}

/// `(min, max)` of the central-difference `|∇φ|` over the band `|φ| ≤ band`.
pub fn band_gradient_range<T: Real>(phi: &Grid<T>, band: T) -> Option<(T, T)> {
    let g = gradient_magnitude(phi);
    phi.as_slice()
        .iter()
        .zip(g.as_slice())
        .filter(|(p, _)| p.abs() <= band)
        .map(|(_, &g)| g)
        .fold(None, |acc, g| match acc {
            None => Some((g, g)),
            Some((lo, hi)) => Some((lo.min(g), hi.max(g))),
        })
}
