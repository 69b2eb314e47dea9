#![allow(dead_code)]

use covseg::evolution::EvolveParams;
use covseg::features::{GrayImage, PatchField};
use covseg::level_set::{dirac_eps, heaviside_eps, LevelSet};
use covseg::spd::{Matrix, SpdMatrix};
use covseg::synth::{CompositeSpec, RegionSpec, TextureSpec};
use covseg::{Grid, Mask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let g = Matrix::from_fn(n, |_, _| gaussian(rng));
    Matrix::from_fn(n, |r, c| 0.5 * (g[(r, c)] + g[(c, r)]))
}

/// Orthogonal matrix by twice-applied modified Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
    for _ in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let (q, v) = (&done[k], &mut rest[0]);
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
    }
    Matrix::from_fn(n, |r, c| cols[c][r])
}

/// `Q diag(λ) Qᵀ` with log-uniform eigenvalues spanning at most `cond`; when
/// `extreme` the spread is exactly `cond`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, cond: f64, extreme: bool) -> SpdMatrix<f64> {
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let span = cond.log10();
    let mut logs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..span)).collect();
    if extreme && n >= 2 {
        logs[0] = 0.0;
        logs[1] = span;
    }
    let q = random_orthogonal(rng, n);
    let m = Matrix::from_fn(n, |r, c| (0..n).map(|k| q[(r, k)] * scale * 10f64.powf(logs[k]) * q[(c, k)]).sum());
    SpdMatrix::new(m.symmetrized()).unwrap()
}

/// Well-conditioned invertible matrix `Q diag(s)`, `s ∈ [0.5, 2]`.
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
    let q = random_orthogonal(rng, n);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Matrix::from_fn(n, |r, c| q[(r, c)] * s[c])
}

pub fn rel_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Naive region moments: `(raw_i, raw_e, area_i, area_e)` by an explicit double loop.
pub fn naive_moments(
    patches: &PatchField<f64>,
    phi: &LevelSet<f64>,
    eps: Option<f64>,
) -> (Matrix<f64>, Matrix<f64>, f64, f64) {
    let n = patches.dim();
    let mut si = vec![0.0; n * n];
    let mut se = vec![0.0; n * n];
    let (mut ai, mut ae) = (0.0, 0.0);
    for y in 0..patches.height() {
        for x in 0..patches.width() {
            let p = *phi.get(x, y);
            let we = match eps {
                Some(e) => heaviside_eps(p, e),
                None => {
                    if p < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            let wi = 1.0 - we;
            let v = patches.vector(x, y);
            for r in 0..n {
                for c in 0..n {
                    si[r * n + c] += wi * v[r] * v[c];
                    se[r * n + c] += we * v[r] * v[c];
                }
            }
            ai += wi;
            ae += we;
        }
    }
    let mi = Matrix::from_row_major(n, si.iter().map(|v| v / ai).collect()).unwrap();
    let me = Matrix::from_row_major(n, se.iter().map(|v| v / ae).collect()).unwrap();
    (mi, me, ai, ae)
}

pub fn ridged(raw: &Matrix<f64>, reg: f64) -> (Matrix<f64>, f64) {
    let n = raw.dim();
    let rho = reg * raw.trace() / n as f64 + 1e-10;
    (raw + &Matrix::identity(n).scale(rho), rho)
}

/// Texture-flow data speed at one pixel evaluated literally as the sum of two
/// tangent-space inner products `⟨L_i, dM_i⟩ + ⟨L_e, dM_e⟩` (ascent of `½J²`).
pub fn literal_speed(patches: &PatchField<f64>, phi: &LevelSet<f64>, params: &EvolveParams<f64>, x: usize, y: usize) -> f64 {
    use covseg::spd::{inner_product, riemannian_log, TangentMatrix};
    let (raw_i, raw_e, ai, ae) = naive_moments(patches, phi, Some(params.epsilon));
    let (mi, _) = ridged(&raw_i, params.reg);
    let (me, _) = ridged(&raw_e, params.reg);
    let mi = SpdMatrix::new(mi).unwrap();
    let me = SpdMatrix::new(me).unwrap();
    let li = riemannian_log(&mi, &me).unwrap();
    let le = riemannian_log(&me, &mi).unwrap();
    let n = patches.dim();
    let nnt = Matrix::outer(patches.vector(x, y));
    let delta = dirac_eps(*phi.get(x, y), params.epsilon);
    // derivative of each regularized moment w.r.t. φ(x), through raw moment and ridge
    let d_of = |raw: &Matrix<f64>, sign: f64, area: f64| {
        let d = (&nnt - raw).scale(sign * delta / area);
        let tr = d.trace();
        TangentMatrix::new(&d + &Matrix::identity(n).scale(params.reg / n as f64 * tr)).unwrap()
    };
    let dmi = d_of(&raw_i, -1.0, ai);
    let dme = d_of(&raw_e, 1.0, ae);
    // gradient of ½J² w.r.t. M_i is −L_i, and w.r.t. M_e is −L_e
    -inner_product(&mi, &li, &dmi).unwrap() - inner_product(&me, &le, &dme).unwrap()
}

/// Two Gaussian-noise textures of different variance in a disk.
pub fn noise_disk(size: usize, seed: u64) -> CompositeSpec {
    let c = size as f64 / 2.0;
    CompositeSpec {
        width: size,
        height: size,
        background: TextureSpec::GaussianNoise { mean: 0.5, sigma: 0.05 },
        foreground: TextureSpec::GaussianNoise { mean: 0.5, sigma: 0.25 },
        region: RegionSpec::Disk { cx: c, cy: c, r: size as f64 * 30.0 / 128.0 },
        seed,
    }
}

/// Horizontal stripes outside, vertical stripes inside a centered square.
pub fn stripes_square(size: usize, seed: u64) -> CompositeSpec {
    CompositeSpec {
        width: size,
        height: size,
        background: TextureSpec::Stripes { angle_deg: 0.0, period: 4.0, contrast: 0.8 },
        foreground: TextureSpec::Stripes { angle_deg: 90.0, period: 4.0, contrast: 0.8 },
        region: RegionSpec::Square { x0: size as f64 / 4.0, y0: size as f64 / 4.0, side: size as f64 / 2.0 },
        seed,
    }
}

pub fn two_level_cartoon(seed: u64) -> CompositeSpec {
    CompositeSpec {
        width: 96,
        height: 96,
        background: TextureSpec::GaussianNoise { mean: 0.3, sigma: 0.03 },
        foreground: TextureSpec::GaussianNoise { mean: 0.7, sigma: 0.03 },
        region: RegionSpec::Square { x0: 28.0, y0: 24.0, side: 40.0 },
        seed,
    }
}

/// Pixels farther than `band` (Chebyshev) from any label change.
pub fn away_from_boundary(truth: &Mask, band: usize) -> Mask {
    let (w, h) = (truth.width(), truth.height());
    let b = band as isize;
    Grid::from_fn(w, h, |x, y| {
        let t = *truth.get(x, y);
        for dy in -b..=b {
            for dx in -b..=b {
                let (u, v) = (x as isize + dx, y as isize + dy);
                if u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h && *truth.get(u as usize, v as usize) != t {
                    return false;
                }
            }
        }
        true
    })
}

/// Pixel accuracy restricted to pixels more than `band` px from the true boundary.
pub fn accuracy_excluding_band(mask: &Mask, truth: &Mask, band: usize) -> f64 {
    let keep = away_from_boundary(truth, band);
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..mask.len() {
        if keep.as_slice()[i] {
            total += 1;
            hit += (mask.as_slice()[i] == truth.as_slice()[i]) as usize;
        }
    }
    hit as f64 / total as f64
}

pub fn iou(a: &Mask, b: &Mask) -> f64 {
    let inter = a.as_slice().iter().zip(b.as_slice()).filter(|(u, v)| **u && **v).count();
    let union = a.as_slice().iter().zip(b.as_slice()).filter(|(u, v)| **u || **v).count();
    inter as f64 / union as f64
}

/// IoU under the better of the two labelings of `b`; region labels are arbitrary
/// in unsupervised two-region segmentation.
pub fn iou_either_polarity(a: &Mask, b: &Mask) -> f64 {
    let flipped = b.map(|v| !v);
    iou(a, b).max(iou(a, &flipped))
}

/// Number of 4-connected components of `true` pixels, by flood fill.
pub fn components(mask: &Mask) -> usize {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut count = 0;
    for start in 0..w * h {
        if !mask.as_slice()[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut push = |j: usize| {
                if mask.as_slice()[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < w {
                push(i + 1);
            }
            if y > 0 {
                push(i - w);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
    }
    count
}

/// Single global threshold minimizing the within-class sum of squares, by exhaustive search
/// over the 8-bit levels; returns the mask of pixels above it.
pub fn optimal_threshold_mask(image: &GrayImage<f64>) -> Mask {
    let vals = image.grid().as_slice();
    let mut best = (f64::INFINITY, 0.0);
    for k in 1..255 {
        let t = k as f64 / 255.0;
        let (lo, hi): (Vec<f64>, Vec<f64>) = vals.iter().partition(|v| **v <= t);
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let sse = |s: &[f64]| {
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let score = sse(&lo) + sse(&hi);
        if score < best.0 {
            best = (score, t);
        }
    }
    image.grid().map(|v| *v > best.1)
}

/// Smooth random perturbation field: a sum of a few random Gaussian bumps and a low-frequency wave.
pub fn smooth_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Grid<f64> {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..w as f64),
                rng.random_range(0.0..h as f64),
                rng.random_range(3.0..10.0),
                gaussian(rng),
            )
        })
        .collect();
    let (fx, fy, ph, amp) = (
        rng.random_range(0.5..2.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.0..std::f64::consts::TAU),
        0.3 * gaussian(rng),
    );
    Grid::from_fn(w, h, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let mut v = amp * (std::f64::consts::TAU * (fx * x / w as f64 + fy * y / h as f64) + ph).sin();
        for &(cx, cy, s, a) in &bumps {
            v += a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp();
        }
        v
    })
}

/// Intensity image of independent Gaussian noise per half-plane `x < split`.
pub fn two_noise_image(rng: &mut ChaCha8Rng, w: usize, h: usize, split: usize) -> GrayImage<f64> {
    GrayImage::from_fn(w, h, |x, _| {
        let s = if x < split { 0.05 } else { 0.2 };
        (0.5 + s * gaussian(rng)).clamp(0.0, 1.0)
    })
    .unwrap()
}
