mod common;

use common::*;
use covseg::chan_vese::{chan_vese, chan_vese_step, region_means, ChanVeseParams, ChanVeseStop};
use covseg::features::{GrayImage, Membership};
use covseg::level_set::{heaviside_eps, init_signed_distance, zero_contour, LevelSet, Shape};
use covseg::synth::{generate, CompositeSpec, RegionSpec, TextureSpec};
use rand::Rng;

fn enclosed_area(phi: &LevelSet<f64>) -> f64 {
    zero_contour(phi.grid())
        .iter()
        .filter(|c| c.closed)
        .map(|c| 0.5 * c.segments().map(|(a, b)| a.0 * b.1 - b.0 * a.1).sum::<f64>().abs())
        .sum()
}

#[test]
fn means_match_weighted_average() {
    let mut r = rng(31);
    let img = GrayImage::from_fn(14, 11, |_, _| r.random_range(0.0..1.0)).unwrap();
    let phi = LevelSet::from_fn(14, 11, |x, y| (x as f64 - 6.0).hypot(y as f64 - 5.0) - 3.7);
    let eps = 1.5;
    let (c1, c2) = region_means(&img, &phi, Membership::Smoothed(eps)).unwrap();
    let (mut si, mut wi, mut se, mut we) = (0.0, 0.0, 0.0, 0.0);
    for y in 0..11 {
        for x in 0..14 {
            let h = heaviside_eps(*phi.grid().get(x, y), eps);
            let v = img.get(x, y);
            si += (1.0 - h) * v;
            wi += 1.0 - h;
            se += h * v;
            we += h;
        }
    }
    assert!((c1 - si / wi).abs() <= 1e-12);
    assert!((c2 - se / we).abs() <= 1e-12);
}

#[test]
fn pure_curvature_flow_shrinks_a_circle() {
    let img = GrayImage::from_fn(64, 64, |_, _| 0.5).unwrap();
    // dt = dt0 / max|speed| with max|speed| ≈ μ/(π r); keep the explicit curvature step stable
    let params =
        ChanVeseParams { mu: 1.0, nu: 0.0, lambda1: 0.0, lambda2: 0.0, dt0: 0.004, reinit_period: 1000, ..Default::default() };
    let mut phi = init_signed_distance(&Shape::Circle { cx: 31.5, cy: 31.5, r: 15.0 }, 64, 64).unwrap();
    let mut area = enclosed_area(&phi);
    for iter in 1..=30 {
        phi = chan_vese_step(&phi, &img, &params, iter).unwrap().0;
        let next = enclosed_area(&phi);
        assert!(next < area, "iteration {iter}: {next} >= {area}");
        area = next;
    }
}

#[test]
fn two_level_image_recovers_levels() {
    let spec = CompositeSpec {
        width: 64,
        height: 64,
        background: TextureSpec::Constant { level: 0.2 },
        foreground: TextureSpec::Constant { level: 0.8 },
        region: RegionSpec::Square { x0: 20.0, y0: 16.0, side: 28.0 },
        seed: 0,
    };
    let (img, truth) = generate::<f64>(&spec).unwrap();
    let res = chan_vese(&img, &Shape::Circle { cx: 31.5, cy: 31.5, r: 10.0 }, &ChanVeseParams::default()).unwrap();
    assert_eq!(res.stop_reason, ChanVeseStop::Converged);
    assert!((res.c1 - 0.8).abs() <= 1e-2 && (res.c2 - 0.2).abs() <= 1e-2, "c1 {} c2 {}", res.c1, res.c2);
    assert!(iou(&res.mask, &truth) >= 0.95);
}

#[test]
fn cartoon_matches_optimal_threshold() {
    let (img, _) = generate::<f64>(&two_level_cartoon(4)).unwrap();
    let res = chan_vese(&img, &Shape::Circle { cx: 47.5, cy: 47.5, r: 24.0 }, &ChanVeseParams::default()).unwrap();
    assert!(iou_either_polarity(&res.mask, &optimal_threshold_mask(&img)) >= 0.95);
    assert_eq!(res.trace.len(), res.iterations);
}

#[test]
fn area_term_collapses_interior() {
    let img = GrayImage::from_fn(32, 32, |_, _| 0.5).unwrap();
    let params = ChanVeseParams { nu: 5.0, ..Default::default() };
    let res = chan_vese(&img, &Shape::Circle { cx: 15.5, cy: 15.5, r: 6.0 }, &params).unwrap();
    assert_eq!(res.stop_reason, ChanVeseStop::Collapse);
}

#[test]
fn invalid_weights_are_rejected() {
    let img = GrayImage::from_fn(8, 8, |_, _| 0.5).unwrap();
    let init = Shape::Circle { cx: 4.0, cy: 4.0, r: 2.0 };
    for p in [
        ChanVeseParams { mu: -1.0, ..Default::default() },
        ChanVeseParams { lambda1: 0.0, ..Default::default() },
        ChanVeseParams { dt0: 0.0, ..Default::default() },
        ChanVeseParams { stable_iters: 0, ..Default::default() },
    ] {
        assert!(chan_vese(&img, &init, &p).is_err());
    }
}
