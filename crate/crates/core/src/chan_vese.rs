//! Chan–Vese two-phase level-set baseline.
//!
//! The textbook flow is written for `φ > 0` inside. This crate keeps `φ < 0` inside, so the
//! update applied here is `φ_t = −δ_ε(φ) · bracket` where `bracket` is the classical
//! `μ κ − ν − λ₁ (I − c₁)² + λ₂ (I − c₂)²` evaluated on `−φ`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{advance, check_partition, maybe_reinitialize, IterationRecord};
use crate::features::{GrayImage, Membership};
use crate::grid::{Grid, Mask};
use crate::level_set::{
    curvature, dirac_eps, gradient_magnitude, heaviside_eps, init_signed_distance, zero_contour, LevelSet, Polyline,
    Shape,
};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChanVeseParams<T> {
    /// Length weight `μ ≥ 0`.
    pub mu: T,
    /// Area weight `ν ≥ 0`.
    pub nu: T,
    pub lambda1: T,
    pub lambda2: T,
    pub epsilon: T,
    pub dt0: T,
    pub max_iters: usize,
    pub reinit_period: usize,
    /// Consecutive iterations with an unchanged interior mask that count as converged.
    pub stable_iters: usize,
}

impl<T: Real> Default for ChanVeseParams<T> {
    fn default() -> Self {
        Self {
            mu: T::lit(0.1),
            nu: T::zero(),
            lambda1: T::one(),
            lambda2: T::one(),
            epsilon: T::one(),
            dt0: T::lit(0.5),
            max_iters: 2000,
            reinit_period: 25,
            stable_iters: 5,
        }
    }
}

impl<T: Real> ChanVeseParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= T::zero() && self.nu >= T::zero()) {
            return Err(Error::InvalidParameter("mu and nu must be nonnegative".into()));
        }
        if !(self.lambda1 > T::zero() && self.lambda2 > T::zero()) {
            return Err(Error::InvalidParameter("lambda1 and lambda2 must be positive".into()));
        }
        if !(self.epsilon > T::zero() && self.dt0 > T::zero()) {
            return Err(Error::InvalidParameter("epsilon and dt0 must be positive".into()));
        }
        if self.max_iters == 0 || self.reinit_period == 0 || self.stable_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// Membership-weighted interior and exterior mean intensities `(c₁, c₂)`.
pub fn region_means<T: Real>(image: &GrayImage<T>, phi: &LevelSet<T>, membership: Membership<T>) -> Result<(T, T)> {
    image.grid().ensure_same_shape(phi.grid())?;
    let (mut si, mut se, mut wi_sum, mut we_sum) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (&v, &p) in image.grid().as_slice().iter().zip(phi.as_slice()) {
        let (wi, we) = membership.weights(p);
        si = si + wi * v;
        se = se + we * v;
        wi_sum = wi_sum + wi;
        we_sum = we_sum + we;
    }
    let tiny = T::lit(crate::features::MIN_REGION_WEIGHT);
    if !(wi_sum > tiny) {
        return Err(Error::Collapse("interior"));
    }
    if !(we_sum > tiny) {
        return Err(Error::Collapse("exterior"));
    }
    Ok((si / wi_sum, se / we_sum))
}

/// Classical bracket `μ κ − ν − λ₁ (I − c₁)² + λ₂ (I − c₂)²` with `κ` the curvature of the
/// interior-positive level set.
#[inline]
pub fn chan_vese_bracket<T: Real>(kappa_pos_inside: T, intensity: T, c1: T, c2: T, params: &ChanVeseParams<T>) -> T {
    let d1 = intensity - c1;
    let d2 = intensity - c2;
    params.mu * kappa_pos_inside - params.nu - params.lambda1 * d1 * d1 + params.lambda2 * d2 * d2
}

/// `∂φ/∂t` for this crate's sign convention.
pub fn chan_vese_speed<T: Real>(phi: &LevelSet<T>, image: &GrayImage<T>, params: &ChanVeseParams<T>) -> Result<Grid<T>> {
    let (c1, c2) = region_means(image, phi, Membership::Smoothed(params.epsilon))?;
    let kappa = if params.mu > T::zero() { Some(curvature(phi.grid())?) } else { None };
    let mut speed = Grid::filled(phi.width(), phi.height(), T::zero());
    let img = image.grid().as_slice();
    speed.as_mut_slice().par_iter_mut().enumerate().for_each(|(i, s)| {
        let p = phi.as_slice()[i];
        // curvature of −φ is −κ(φ)
        let k = kappa.as_ref().map_or(T::zero(), |k| -k.as_slice()[i]);
        *s = -dirac_eps(p, params.epsilon) * chan_vese_bracket(k, img[i], c1, c2, params);
    });
    Ok(speed)
}

/// `μ·Length + ν·Area + λ₁ Σ (1−H)(I−c₁)² + λ₂ Σ H (I−c₂)²` with smoothed `H`.
pub fn chan_vese_energy<T: Real>(phi: &LevelSet<T>, image: &GrayImage<T>, params: &ChanVeseParams<T>) -> Result<T> {
    let (c1, c2) = region_means(image, phi, Membership::Smoothed(params.epsilon))?;
    let grad = gradient_magnitude(phi.grid());
    let mut energy = T::zero();
    for ((&p, &v), &g) in phi.as_slice().iter().zip(image.grid().as_slice()).zip(grad.as_slice()) {
        let h = heaviside_eps(p, params.epsilon);
        let inside = T::one() - h;
        energy = energy
            + params.mu * dirac_eps(p, params.epsilon) * g
            + params.nu * inside
            + params.lambda1 * inside * (v - c1) * (v - c1)
            + params.lambda2 * h * (v - c2) * (v - c2);
    }
    Ok(energy)
}

/// One explicit step with adaptive `dt = dt0 / max|speed|` and periodic reinitialization.
/// `iter` is the index of the step being taken (1-based).
pub fn chan_vese_step<T: Real>(
    phi: &LevelSet<T>,
    image: &GrayImage<T>,
    params: &ChanVeseParams<T>,
    iter: usize,
) -> Result<(LevelSet<T>, T, bool)> {
    let speed = chan_vese_speed(phi, image, params)?;
    let mut next = phi.clone();
    let dt = advance(&mut next, &speed, params.dt0);
    let reinit = maybe_reinitialize(&mut next, iter, params.reinit_period)?;
    check_partition(&next)?;
    Ok((next, dt, reinit))
}

#[derive(Clone, Debug)]
pub struct ChanVeseResult<T> {
    pub mask: Mask,
    pub phi: LevelSet<T>,
    pub contours: Vec<Polyline>,
    pub c1: T,
    pub c2: T,
    /// Energy after each iteration in `cost`.
    pub trace: Vec<IterationRecord<T>>,
    pub iterations: usize,
    pub stop_reason: ChanVeseStop,
    pub elapsed: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChanVeseStop {
    Converged,
    MaxIters,
    Collapse,
}

impl ChanVeseStop {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChanVeseStop::Converged => "converged",
            ChanVeseStop::MaxIters => "max_iters",
            ChanVeseStop::Collapse => "collapse",
        }
    }
}

/// Runs Chan–Vese until the interior mask is unchanged for `stable_iters` steps.
pub fn chan_vese<T: Real>(image: &GrayImage<T>, init: &Shape, params: &ChanVeseParams<T>) -> Result<ChanVeseResult<T>> {
    chan_vese_with(image, init, params, |_, _| {})
}

pub fn chan_vese_with<T: Real>(
    image: &GrayImage<T>,
    init: &Shape,
    params: &ChanVeseParams<T>,
    mut observer: impl FnMut(&LevelSet<T>, &IterationRecord<T>),
) -> Result<ChanVeseResult<T>> {
    params.validate()?;
    let started = Instant::now();
    let mut phi: LevelSet<T> = init_signed_distance(init, image.width(), image.height())?;
    let mut mask = phi.interior_mask();
    let mut stable = 0;
    let mut trace = Vec::new();
    let mut stop = ChanVeseStop::MaxIters;
    for iter in 1..=params.max_iters {
        let (next, dt, reinit) = match chan_vese_step(&phi, image, params, iter) {
            Ok(r) => r,
            Err(Error::Collapse(which)) => {
                log::warn!("{which} region collapsed at iteration {iter}");
                stop = ChanVeseStop::Collapse;
                break;
            }
            Err(e) => return Err(e),
        };
        phi = next;
        let record = IterationRecord { iter, cost: chan_vese_energy(&phi, image, params)?, dt, reinit };
        trace.push(record);
        observer(&phi, &record);
        let next_mask = phi.interior_mask();
        if next_mask == mask {
            stable += 1;
        } else {
            stable = 0;
            mask = next_mask;
        }
        if stable >= params.stable_iters {
            stop = ChanVeseStop::Converged;
            break;
        }
    }
    let (c1, c2) = region_means(image, &phi, Membership::Binary)?;
    Ok(ChanVeseResult {
        mask: phi.interior_mask(),
        contours: zero_contour(phi.grid()),
        iterations: trace.len(),
        phi,
        c1,
        c2,
        trace,
        stop_reason: stop,
        elapsed: started.elapsed(),
    })
}
