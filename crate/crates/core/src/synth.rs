//! Deterministic two-texture composites with ground-truth masks.
//!
//! Noise comes from ChaCha8 (`rand_chacha`), seeded with `seed`; the background texture
//! draws from stream 0 and the foreground from stream 1, each filling the whole frame in
//! raster order, so the output does not depend on the region shape or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::GrayImage;
use crate::grid::{Grid, Mask};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TextureSpec {
    /// Sinusoidal stripes; `angle_deg` is the direction the stripes run (0° = horizontal bands).
    Stripes { angle_deg: f64, period: f64, contrast: f64 },
    Checkerboard { cell: usize, contrast: f64 },
    GaussianNoise { mean: f64, sigma: f64 },
    Constant { level: f64 },
}

impl TextureSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            TextureSpec::Stripes { period, contrast, angle_deg } => {
                if !(period >= 2.0) || !angle_deg.is_finite() {
                    return bad(format!("stripe period {period} must be at least 2 px"));
                }
                if !(0.0..=1.0).contains(&contrast) {
                    return bad(format!("contrast {contrast} outside [0, 1]"));
                }
            }
            TextureSpec::Checkerboard { cell, contrast } => {
                if cell < 2 {
                    return bad(format!("checkerboard cell {cell} must be at least 2 px"));
                }
                if !(0.0..=1.0).contains(&contrast) {
                    return bad(format!("contrast {contrast} outside [0, 1]"));
                }
            }
            TextureSpec::GaussianNoise { mean, sigma } => {
                if !(sigma >= 0.0) || !mean.is_finite() || !sigma.is_finite() {
                    return bad(format!("noise needs finite mean and sigma >= 0 (got {mean}, {sigma})"));
                }
            }
            TextureSpec::Constant { level } => {
                if !level.is_finite() {
                    return bad("constant level must be finite".into());
                }
            }
        }
        Ok(())
    }

    /// Renders the texture over the full frame.
    fn render(&self, width: usize, height: usize, seed: u64, stream: u64) -> Grid<f64> {
        let clip = |v: f64| v.clamp(0.0, 1.0);
        match *self {
            TextureSpec::Stripes { angle_deg, period, contrast } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                Grid::from_fn(width, height, |x, y| {
                    let u = -(x as f64) * s + y as f64 * c;
                    clip(0.5 + 0.5 * contrast * (std::f64::consts::TAU * u / period).sin())
                })
            }
            TextureSpec::Checkerboard { cell, contrast } => Grid::from_fn(width, height, |x, y| {
                let sign = if (x / cell + y / cell) % 2 == 0 { 1.0 } else { -1.0 };
                clip(0.5 + 0.5 * contrast * sign)
            }),
            TextureSpec::GaussianNoise { mean, sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream);
                let normal = Normal::new(mean, sigma).expect("validated sigma");
                Grid::from_fn(width, height, |_, _| clip(normal.sample(&mut rng)))
            }
            TextureSpec::Constant { level } => Grid::filled(width, height, clip(level)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionSpec {
    Disk { cx: f64, cy: f64, r: f64 },
    /// Axis-aligned square covering `x0 ≤ x < x0 + side`, `y0 ≤ y < y0 + side`.
    Square { x0: f64, y0: f64, side: f64 },
    TwoDisks { a: (f64, f64, f64), b: (f64, f64, f64) },
}

impl RegionSpec {
    /// Ground-truth predicate at pixel `(x, y)`.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (x, y) = (x as f64, y as f64);
        let in_disk = |(cx, cy, r): (f64, f64, f64)| (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
        match *self {
            RegionSpec::Disk { cx, cy, r } => in_disk((cx, cy, r)),
            RegionSpec::Square { x0, y0, side } => x >= x0 && x < x0 + side && y >= y0 && y < y0 + side,
            RegionSpec::TwoDisks { a, b } => in_disk(a) || in_disk(b),
        }
    }

    /// Bounding box `(x0, y0, x1, y1)`.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let disk = |(cx, cy, r): (f64, f64, f64)| (cx - r, cy - r, cx + r, cy + r);
        match *self {
            RegionSpec::Disk { cx, cy, r } => disk((cx, cy, r)),
            RegionSpec::Square { x0, y0, side } => (x0, y0, x0 + side - 1.0, y0 + side - 1.0),
            RegionSpec::TwoDisks { a, b } => {
                let (p, q) = (disk(a), disk(b));
                (p.0.min(q.0), p.1.min(q.1), p.2.max(q.2), p.3.max(q.3))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RegionSpec::Disk { r, .. } => r > 0.0,
            RegionSpec::Square { side, .. } => side >= 1.0,
            RegionSpec::TwoDisks { a, b } => a.2 > 0.0 && b.2 > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShape(format!("degenerate region {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeSpec {
    pub width: usize,
    pub height: usize,
    pub background: TextureSpec,
    pub foreground: TextureSpec,
    pub region: RegionSpec,
    pub seed: u64,
}

impl CompositeSpec {
    /// Checks that the region keeps at least `margin` pixels from every image border.
    pub fn check_margin(&self, margin: usize) -> Result<()> {
        let (x0, y0, x1, y1) = self.region.bounds();
        let m = margin as f64;
        let (w, h) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if x0 >= m && y0 >= m && x1 <= w - m && y1 <= h - m {
            Ok(())
        } else {
            Err(Error::InvalidShape(format!("region {:?} is closer than {margin} px to the frame", self.region)))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::InvalidParameter(format!("frame {}x{} too small", self.width, self.height)));
        }
        self.background.validate()?;
        self.foreground.validate()?;
        self.region.validate()?;
        self.check_margin(1)
    }

    pub fn mask(&self) -> Mask {
        Grid::from_fn(self.width, self.height, |x, y| self.region.contains(x, y))
    }
}

/// Renders the composite and its ground-truth foreground mask.
pub fn generate<T: Real>(spec: &CompositeSpec) -> Result<(GrayImage<T>, Mask)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let bg = spec.background.render(w, h, spec.seed, 0);
    let fg = spec.foreground.render(w, h, spec.seed, 1);
    let mask = spec.mask();
    let data = (0..w * h)
        .map(|i| T::lit(if mask.as_slice()[i] { fg.as_slice()[i] } else { bg.as_slice()[i] }))
        .collect();
    Ok((GrayImage::new(Grid::from_vec(w, h, data)?)?, mask))
}
