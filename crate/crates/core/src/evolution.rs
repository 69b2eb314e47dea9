//! Gradient ascent of `J(φ) = d(M^i(φ), M^e(φ))` as a level-set evolution.
//!
//! The data speed at a pixel with patch vector `N` is
//!
//! ```text
//! δ_ε(φ) · [ (Nᵀ G_i N − a_i) / |Ω_int| + (a_e − Nᵀ G_e N) / |Ω_ext| ]
//! ```
//!
//! with `L_i = Log_{M^i}(M^e)`, `G_i = (M^i)⁻¹ L_i (M^i)⁻¹`, `a_i = tr((M^i)⁻¹ L_i)` and the
//! exterior terms defined symmetrically. This is the expansion of
//! `⟨−L_i, ∂M^i/∂φ⟩_{M^i} + ⟨−L_e, ∂M^e/∂φ⟩_{M^e}`, i.e. the gradient of `½ J²`; the
//! trace-relative ridge is differentiated too, which adds `O(reg)` corrections to `G` and `a`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract_patches, region_second_moments, GrayImage, Membership, PatchField, RegionMoments};
use crate::grid::{Grid, Mask};
use crate::level_set::{
    band_gradient_range, curvature, dirac_eps, init_signed_distance, reinitialize, zero_contour, LevelSet, Polyline,
    Shape,
};
use crate::scalar::Real;
use crate::spd::{geodesic_distance, riemannian_log, Matrix, TangentMatrix};

/// Reinitialization pseudo-time iterations per trigger.
pub const REINIT_ITERATIONS: usize = 20;
/// Reinitialization pseudo-time step.
pub const REINIT_DT: f64 = 0.5;
/// Half-width (pixels) of the band monitored for `|∇φ|` drift.
pub const REINIT_BAND: f64 = 3.0;
/// `|∇φ|` range inside the band outside of which reinitialization is forced.
pub const REINIT_GRADIENT_RANGE: (f64, f64) = (0.5, 2.0);
/// Relative margin a cost must exceed the best so far by to count as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;

/// Parameters of the texture flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveParams<T> {
    /// Patch side `R` (odd).
    pub side: usize,
    /// Dimensionless curvature weight; the effective weight is this times `max|data speed|` at iteration 0.
    pub lambda: T,
    pub epsilon: T,
    /// Largest per-step displacement in pixels.
    pub dt0: T,
    pub max_iters: usize,
    /// Iterations between forced reinitializations. At 1 the cost is always
    /// measured on a signed distance function, so its history is comparable
    /// across steps.
    pub reinit_period: usize,
    /// Relative ridge added to both moment matrices.
    pub reg: T,
    pub patience: usize,
}

impl<T: Real> Default for EvolveParams<T> {
    fn default() -> Self {
        Self {
            side: 5,
            lambda: T::lit(0.2),
            epsilon: T::one(),
            dt0: T::lit(0.5),
            max_iters: 2000,
            reinit_period: 1,
            reg: T::lit(1e-2),
            patience: 3,
        }
    }
}

impl<T: Real> EvolveParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.side == 0 || self.side.is_multiple_of(2) {
            return bad("R must be an odd positive integer");
        }
        if !(self.lambda >= T::zero()) {
            return bad("lambda must be nonnegative");
        }
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be positive");
        }
        if !(self.dt0 > T::zero()) {
            return bad("dt0 must be positive");
        }
        if self.max_iters == 0 || self.reinit_period == 0 || self.patience == 0 {
            return bad("max_iters, reinit_period and patience must be positive");
        }
        if !(self.reg >= T::zero()) {
            return bad("reg must be nonnegative");
        }
        Ok(())
    }

    pub fn membership(&self) -> Membership<T> {
        Membership::Smoothed(self.epsilon)
    }
}

/// Per-iteration manifold quantities derived from the current region moments.
#[derive(Clone, Debug)]
pub struct ManifoldCache<T> {
    pub moments: RegionMoments<T>,
    pub cost: T,
    /// `L_i = Log_{M^i}(M^e)`
    pub log_int: TangentMatrix<T>,
    /// `L_e = Log_{M^e}(M^i)`
    pub log_ext: TangentMatrix<T>,
    /// Ridge-corrected `G_i`.
    pub kernel_int: Matrix<T>,
    pub kernel_ext: Matrix<T>,
    /// Ridge-corrected `a_i`.
    pub offset_int: T,
    pub offset_ext: T,
    // G_i/|Ω_int| − G_e/|Ω_ext| and a_i/|Ω_int| − a_e/|Ω_ext|
    quad: Matrix<T>,
    shift: T,
}

impl<T: Real> ManifoldCache<T> {
    pub fn new(moments: RegionMoments<T>) -> Result<Self> {
        let m_i = moments.m_int();
        let m_e = moments.m_ext();
        let n = m_i.dim();
        let cost = geodesic_distance(m_i, m_e)?;
        let log_int = riemannian_log(m_i, m_e)?;
        let log_ext = riemannian_log(m_e, m_i)?;
        let rel = moments.reg / T::from_count(n);

        let side = |stats: &crate::features::RegionStats<T>, log: &TangentMatrix<T>| {
            let inv = stats.moment.inverse();
            let inv_l = inv.matmul(log.matrix());
            let g = inv_l.matmul(&inv).symmetrized();
            let a = inv_l.trace();
            let tr_g = g.trace();
            let mut kernel = g;
            for d in 0..n {
                kernel[(d, d)] = kernel[(d, d)] + rel * tr_g;
            }
            let offset = a - stats.ridge * tr_g + rel * stats.raw.trace() * tr_g;
            (kernel, offset)
        };
        let (kernel_int, offset_int) = side(&moments.interior, &log_int);
        let (kernel_ext, offset_ext) = side(&moments.exterior, &log_ext);
        let (ai, ae) = (moments.area_int(), moments.area_ext());
        let quad = &kernel_int.scale(ai.recip()) - &kernel_ext.scale(ae.recip());
        let shift = offset_int / ai - offset_ext / ae;
        Ok(Self { moments, cost, log_int, log_ext, kernel_int, kernel_ext, offset_int, offset_ext, quad, shift })
    }

    /// Bracketed data term at a patch vector, before the `δ_ε(φ)` factor.
    #[inline]
    pub fn data_term(&self, patch: &[T]) -> T {
        self.quad.quadratic_form(patch) - self.shift
    }
}

/// `J(φ)` with smoothed membership.
pub fn cost<T: Real>(phi: &LevelSet<T>, patches: &PatchField<T>, params: &EvolveParams<T>) -> Result<T> {
    let moments = region_second_moments(patches, phi, params.membership(), params.reg)?;
    geodesic_distance(moments.m_int(), moments.m_ext())
}

/// Why an evolution run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    CostDecreased,
    MaxIters,
    Collapse,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::CostDecreased => "cost_decreased",
            StopReason::MaxIters => "max_iters",
            StopReason::Collapse => "collapse",
        }
    }
}

/// One row of the per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub cost: T,
    pub dt: T,
    pub reinit: bool,
}

/// Mutable state of the ascent loop.
#[derive(Clone, Debug)]
pub struct EvolutionState<T> {
    pub phi: LevelSet<T>,
    pub iter: usize,
    pub cost_history: Vec<T>,
    pub cache: ManifoldCache<T>,
    /// Curvature weight after auto-calibration.
    pub lambda_eff: T,
}

impl<T: Real> EvolutionState<T> {
    /// Builds the state at iteration 0 and calibrates the curvature weight.
    pub fn new(phi: LevelSet<T>, patches: &PatchField<T>, params: &EvolveParams<T>) -> Result<Self> {
        params.validate()?;
        if params.side != patches.side() {
            return Err(Error::InvalidParameter(format!(
                "params R = {} but patches have R = {}",
                params.side,
                patches.side()
            )));
        }
        let moments = region_second_moments(patches, &phi, params.membership(), params.reg)?;
        let cache = ManifoldCache::new(moments)?;
        let mut state = Self { phi, iter: 0, cost_history: vec![cache.cost], cache, lambda_eff: T::zero() };
        if params.lambda > T::zero() {
            let data = data_speed(&state, patches, params);
            let peak = data.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()));
            state.lambda_eff = params.lambda * peak;
        }
        Ok(state)
    }

    pub fn cost(&self) -> T {
        self.cache.cost
    }

    fn refresh(&mut self, patches: &PatchField<T>, params: &EvolveParams<T>) -> Result<()> {
        let moments = region_second_moments(patches, &self.phi, params.membership(), params.reg)?;
        self.cache = ManifoldCache::new(moments)?;
        Ok(())
    }
}

/// Data part of the speed field (no curvature term).
pub fn data_speed<T: Real>(state: &EvolutionState<T>, patches: &PatchField<T>, params: &EvolveParams<T>) -> Grid<T> {
    let w = patches.width();
    let mut out = Grid::filled(w, patches.height(), T::zero());
    out.as_mut_slice().par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, s) in row.iter_mut().enumerate() {
            let delta = dirac_eps(*state.phi.get(x, y), params.epsilon);
            *s = delta * state.cache.data_term(patches.vector(x, y));
        }
    });
    out
}

/// Full speed `data + λ κ δ_ε(φ)` for the current state.
pub fn speed_field<T: Real>(
    state: &EvolutionState<T>,
    patches: &PatchField<T>,
    params: &EvolveParams<T>,
) -> Result<Grid<T>> {
    patches.ensure_grid(state.phi.grid())?;
    let mut speed = data_speed(state, patches, params);
    if state.lambda_eff > T::zero() {
        let kappa = curvature(state.phi.grid())?;
        let lambda = state.lambda_eff;
        speed.as_mut_slice().par_iter_mut().zip(kappa.as_slice().par_iter()).zip(state.phi.as_slice().par_iter()).for_each(
            |((s, &k), &p)| {
                *s = *s + lambda * k * dirac_eps(p, params.epsilon);
            },
        );
    }
    Ok(speed)
}

/// Applies `φ ← φ + dt · speed` with `dt = dt0 / max|speed|`; returns `dt`.
pub(crate) fn advance<T: Real>(phi: &mut LevelSet<T>, speed: &Grid<T>, dt0: T) -> T {
    let peak = speed.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let dt = dt0 / peak.max(T::lit(1e-12));
    phi.as_mut_slice().par_iter_mut().zip(speed.as_slice().par_iter()).for_each(|(p, &s)| *p = *p + dt * s);
    dt
}

/// Reinitializes when the period elapses or the band gradient drifts out of range.
pub(crate) fn maybe_reinitialize<T: Real>(phi: &mut LevelSet<T>, iter: usize, period: usize) -> Result<bool> {
    let due = iter.is_multiple_of(period);
    let drifted = match band_gradient_range(phi.grid(), T::lit(REINIT_BAND)) {
        Some((lo, hi)) => lo < T::lit(REINIT_GRADIENT_RANGE.0) || hi > T::lit(REINIT_GRADIENT_RANGE.1),
        None => false,
    };
    if due || drifted {
        *phi = reinitialize(phi, REINIT_ITERATIONS, T::lit(REINIT_DT))?;
        return Ok(true);
    }
    Ok(false)
}

/// One explicit ascent step. On collapse the state is left untouched and
/// [`Error::Collapse`] is returned.
pub fn step<T: Real>(
    state: &mut EvolutionState<T>,
    patches: &PatchField<T>,
    params: &EvolveParams<T>,
) -> Result<IterationRecord<T>> {
    let speed = speed_field(state, patches, params)?;
    let mut phi = state.phi.clone();
    let dt = advance(&mut phi, &speed, params.dt0);
    let iter = state.iter + 1;
    let reinit = maybe_reinitialize(&mut phi, iter, params.reinit_period)?;
    check_partition(&phi)?;
    let prev = std::mem::replace(&mut state.phi, phi);
    if let Err(e) = state.refresh(patches, params) {
        state.phi = prev;
        return Err(e);
    }
    state.iter = iter;
    state.cost_history.push(state.cache.cost);
    Ok(IterationRecord { iter, cost: state.cache.cost, dt, reinit })
}

pub(crate) fn check_partition<T: Real>(phi: &LevelSet<T>) -> Result<()> {
    let s = phi.as_slice();
    if !s.iter().any(|&v| v < T::zero()) {
        return Err(Error::Collapse("interior"));
    }
    if !s.iter().any(|&v| v >= T::zero()) {
        return Err(Error::Collapse("exterior"));
    }
    Ok(())
}

/// Outcome of a segmentation run.
#[derive(Clone, Debug)]
pub struct SegmentationResult<T> {
    /// Interior mask (`true` where the returned `φ < 0`).
    pub mask: Mask,
    pub phi: LevelSet<T>,
    pub contours: Vec<Polyline>,
    /// `J` after every iteration, starting with the initial contour.
    pub cost_history: Vec<T>,
    pub trace: Vec<IterationRecord<T>>,
    pub iterations: usize,
    /// Iteration whose `φ` is returned.
    pub best_iter: usize,
    pub stop_reason: StopReason,
    pub lambda_eff: T,
    pub elapsed: Duration,
}

impl<T: Real> SegmentationResult<T> {
    pub fn best_cost(&self) -> T {
        self.cost_history[self.best_iter]
    }
}

/// Tracks the best iterate and the patience counter.
pub(crate) struct BestTracker<T> {
    pub best: T,
    pub best_iter: usize,
    pub best_phi: LevelSet<T>,
    stale: usize,
}

impl<T: Real> BestTracker<T> {
    pub fn new(cost: T, phi: LevelSet<T>) -> Self {
        Self { best: cost, best_iter: 0, best_phi: phi, stale: 0 }
    }

    /// Records an iterate; returns the number of consecutive non-improving iterations.
    pub fn observe(&mut self, iter: usize, cost: T, phi: &LevelSet<T>) -> usize {
        let margin = T::lit(IMPROVEMENT_TOL) * self.best.abs().max(T::one());
        if cost > self.best + margin {
            self.best = cost;
            self.best_iter = iter;
            self.best_phi = phi.clone();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale
    }
}

/// Runs the flow from an initial shape until `J` stops improving for `patience`
/// consecutive iterations, `max_iters` is reached, or a region collapses.
pub fn evolve<T: Real>(image: &GrayImage<T>, init: &Shape, params: &EvolveParams<T>) -> Result<SegmentationResult<T>> {
    evolve_with(image, init, params, |_, _| {})
}

/// [`evolve`] with an observer called after every completed iteration.
pub fn evolve_with<T: Real>(
    image: &GrayImage<T>,
    init: &Shape,
    params: &EvolveParams<T>,
    mut observer: impl FnMut(&EvolutionState<T>, &IterationRecord<T>),
) -> Result<SegmentationResult<T>> {
    params.validate()?;
    let started = Instant::now();
    let patches = extract_patches(image, params.side)?;
    let phi0 = init_signed_distance(init, image.width(), image.height())?;
    let mut state = EvolutionState::new(phi0, &patches, params)?;
    let mut tracker = BestTracker::new(state.cost(), state.phi.clone());
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIters;

    while state.iter < params.max_iters {
        let record = match step(&mut state, &patches, params) {
            Ok(r) => r,
            Err(Error::Collapse(which)) => {
                log::warn!("{which} region collapsed at iteration {}", state.iter + 1);
                stop_reason = StopReason::Collapse;
                break;
            }
            Err(e) => return Err(e),
        };
        trace.push(record);
        observer(&state, &record);
        if tracker.observe(record.iter, record.cost, &state.phi) >= params.patience {
            stop_reason = StopReason::CostDecreased;
            break;
        }
    }

    let phi = tracker.best_phi;
    Ok(SegmentationResult {
        mask: phi.interior_mask(),
        contours: zero_contour(phi.grid()),
        phi,
        cost_history: state.cost_history,
        trace,
        iterations: state.iter,
        best_iter: tracker.best_iter,
        stop_reason,
        lambda_eff: state.lambda_eff,
        elapsed: started.elapsed(),
    })
}
