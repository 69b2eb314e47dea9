mod common;

use common::*;
use covseg::features::{extract_patches, region_second_moments, GrayImage, Membership};
use covseg::level_set::LevelSet;
use rand::Rng;

fn random_image(seed: u64, w: usize, h: usize) -> GrayImage<f64> {
    let mut r = rng(seed);
    GrayImage::from_fn(w, h, |_, _| r.random_range(0.0..1.0)).unwrap()
}

fn random_phi(seed: u64, w: usize, h: usize) -> LevelSet<f64> {
    let mut r = rng(seed);
    let (cx, cy, rad) = (r.random_range(5.0..11.0), r.random_range(5.0..11.0), r.random_range(3.0..6.0));
    let wobble = r.random_range(0.0..1.5);
    LevelSet::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        dx.hypot(dy) - rad + wobble * (0.7 * x as f64).sin()
    })
}

#[test]
fn replicate_padding_at_corner() {
    let img = GrayImage::from_fn(4, 3, |x, y| (x + 4 * y) as f64 / 20.0).unwrap();
    let p = extract_patches(&img, 3).unwrap();
    let v = p.vector(0, 0);
    let expect: Vec<f64> = [(0, 0), (0, 0), (1, 0), (0, 0), (0, 0), (1, 0), (0, 1), (0, 1), (1, 1)]
        .iter()
        .map(|&(x, y)| img.get(x, y))
        .collect();
    assert_eq!(v, &expect[..]);
}

#[test]
fn binary_moments_match_double_loop() {
    for seed in 0..4 {
        let img = random_image(seed, 16, 16);
        let phi = random_phi(seed + 100, 16, 16);
        let p = extract_patches(&img, 3).unwrap();
        let m = region_second_moments(&p, &phi, Membership::Binary, 1e-3).unwrap();
        let (ri, re, ai, ae) = naive_moments(&p, &phi, None);
        assert!((&m.interior.raw - &ri).max_abs() <= 1e-12);
        assert!((&m.exterior.raw - &re).max_abs() <= 1e-12);
        let (mi, _) = ridged(&ri, 1e-3);
        let (me, _) = ridged(&re, 1e-3);
        assert!((m.m_int().matrix() - &mi).max_abs() <= 1e-12);
        assert!((m.m_ext().matrix() - &me).max_abs() <= 1e-12);
        assert_eq!(m.area_int(), ai);
        assert_eq!(m.area_ext(), ae);
        assert_eq!(ai + ae, 256.0);
    }
}

#[test]
fn smoothed_moments_match_double_loop() {
    let img = random_image(7, 16, 16);
    let phi = random_phi(8, 16, 16);
    let p = extract_patches(&img, 3).unwrap();
    let m = region_second_moments(&p, &phi, Membership::Smoothed(1.3), 0.0).unwrap();
    let (ri, re, ai, ae) = naive_moments(&p, &phi, Some(1.3));
    assert!((&m.interior.raw - &ri).max_abs() <= 1e-12);
    assert!((&m.exterior.raw - &re).max_abs() <= 1e-12);
    assert!((m.area_int() - ai).abs() <= 1e-9);
    assert!((m.area_int() + m.area_ext() - 256.0).abs() <= 1e-9);
    assert!((m.area_ext() - ae).abs() <= 1e-9);
}

#[test]
fn binary_membership_partitions_pixels() {
    // sum of both unnormalized accumulators equals the all-pixel accumulator
    let img = random_image(9, 12, 10);
    let phi = LevelSet::from_fn(12, 10, |x, _| x as f64 - 5.5);
    let p = extract_patches(&img, 3).unwrap();
    let m = region_second_moments(&p, &phi, Membership::Binary, 0.0).unwrap();
    let whole = LevelSet::from_fn(12, 10, |_, _| 1.0);
    let (_, all, _, _) = naive_moments(&p, &whole, None);
    let total = &m.interior.raw.scale(m.area_int()) + &m.exterior.raw.scale(m.area_ext());
    assert!((&total - &all.scale(120.0)).max_abs() <= 1e-11);
}

#[test]
fn intensity_scaling_scales_moments_quadratically() {
    let img = random_image(10, 16, 16);
    let phi = random_phi(11, 16, 16);
    let s = 0.6;
    let scaled = img.map_intensity(|v| s * v).unwrap();
    for side in [1, 3] {
        let a = region_second_moments(&extract_patches(&img, side).unwrap(), &phi, Membership::Binary, 0.0).unwrap();
        let b = region_second_moments(&extract_patches(&scaled, side).unwrap(), &phi, Membership::Binary, 0.0).unwrap();
        assert!(rel_diff(&b.interior.raw, &a.interior.raw.scale(s * s)) <= 1e-12);
        assert!(rel_diff(&b.exterior.raw, &a.exterior.raw.scale(s * s)) <= 1e-12);
    }
}

#[test]
fn smoothed_converges_to_binary_as_epsilon_vanishes() {
    // |φ| >= 1 off the contour, so H_ε is within ε/π of the step everywhere
    let img = random_image(12, 16, 16);
    let phi = LevelSet::from_fn(16, 16, |x, _| if x < 8 { -1.0 - x as f64 * 0.1 } else { 1.0 + x as f64 * 0.1 });
    let p = extract_patches(&img, 3).unwrap();
    let bin = region_second_moments(&p, &phi, Membership::Binary, 0.0).unwrap();
    let smooth = region_second_moments(&p, &phi, Membership::Smoothed(1e-3), 0.0).unwrap();
    assert!(rel_diff(&smooth.interior.raw, &bin.interior.raw) <= 1e-3);
    assert!(rel_diff(&smooth.exterior.raw, &bin.exterior.raw) <= 1e-3);
}
