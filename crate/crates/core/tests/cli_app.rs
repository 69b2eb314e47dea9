mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use covseg::cli::{run, InputSource, Mode, RunConfig, EXIT_COLLAPSE, EXIT_ERROR, EXIT_OK};
use covseg::io::{encode_pgm, image_to_u8, read_gray_image};
use covseg::level_set::Shape;
use covseg::synth::generate;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn covseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covseg")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<(Vec<u8>, String)> = (0..2)
        .map(|k| {
            let (mask, csv) = (dir.path().join(format!("m{k}.pgm")), dir.path().join(format!("c{k}.csv")));
            let out = covseg(&[
                "--synth",
                s(&fixture("noise_disk.cfg")),
                "--max-iters",
                "20",
                "--out-mask",
                s(&mask),
                "--out-cost",
                s(&csv),
            ]);
            assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
            (std::fs::read(mask).unwrap(), std::fs::read_to_string(csv).unwrap())
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn cost_trace_has_one_finite_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("cost.csv");
    let out = covseg(&["--synth", s(&fixture("two_disks.cfg")), "--max-iters", "12", "--out-cost", s(&csv)]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let iterations: usize = stdout
        .split_whitespace()
        .find_map(|t| t.strip_prefix("iterations="))
        .and_then(|v| v.parse().ok())
        .expect("summary line");
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,J,dt,reinit"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), iterations);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0].parse::<usize>().unwrap(), k + 1);
        assert!(cols[1].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn missing_input_fails_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("mask.pgm");
    let overlay = dir.path().join("overlay.png");
    let out = covseg(&["--input", s(&dir.path().join("absent.pgm")), "--out-mask", s(&mask), "--out-overlay", s(&overlay)]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.pgm"));
    assert!(!mask.exists() && !overlay.exists());
}

#[test]
fn usage_errors_exit_with_error_code() {
    assert_eq!(covseg(&[]).status.code(), Some(EXIT_ERROR));
    assert_eq!(covseg(&["--synth", s(&fixture("cartoon.cfg")), "--radius", "4"]).status.code(), Some(EXIT_ERROR));
    assert_eq!(covseg(&["--synth", s(&fixture("cartoon.cfg")), "--mode", "watershed"]).status.code(), Some(EXIT_ERROR));
    assert_eq!(covseg(&["--bogus"]).status.code(), Some(EXIT_ERROR));
}

#[test]
fn collapse_writes_artifacts_and_exits_with_collapse_code() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("mask.pgm");
    let out = covseg(&[
        "--synth",
        s(&fixture("cartoon.cfg")),
        "--mode",
        "chanvese",
        "--nu",
        "50",
        "--init",
        "circle:10,10,6",
        "--out-mask",
        s(&mask),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_COLLAPSE), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(mask.exists());
}

#[test]
fn pgm_input_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let (img, truth) = generate::<f64>(&noise_disk(64, 2)).unwrap();
    let input = dir.path().join("in.pgm");
    std::fs::write(&input, encode_pgm(&image_to_u8(&img))).unwrap();
    let (mask, overlay) = (dir.path().join("mask.pgm"), dir.path().join("ov.ppm"));
    let out = covseg(&[
        "--input",
        s(&input),
        "--max-iters",
        "6",
        "--snapshot-stride",
        "3",
        "--out-mask",
        s(&mask),
        "--out-overlay",
        s(&overlay),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(overlay.exists());
    assert!(dir.path().join("ov_iter00003.ppm").exists());
    assert!(dir.path().join("ov_iter00006.ppm").exists());
    let written = read_gray_image::<f64>(&mask).unwrap();
    assert_eq!((written.width(), written.height()), (truth.width(), truth.height()));
    assert!(written.grid().as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("synth = {}\nmax-iters = 3\nradius = 3\n", s(&fixture("cartoon.cfg")))).unwrap();
    let out = covseg(&["--config", s(&cfg), "--max-iters", "2", "--patience", "100"]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("iterations=2 "));
}

#[test]
fn gray_level_texture_mode_agrees_with_chan_vese() {
    let spec = two_level_cartoon(8);
    let init = Some(Shape::Circle { cx: 47.5, cy: 47.5, r: 24.0 });
    let mut tex = RunConfig::new(Mode::Texture, InputSource::Synth(spec));
    tex.texture.side = 1;
    tex.init = init;
    let mut cv = RunConfig::new(Mode::ChanVese, InputSource::Synth(spec));
    cv.init = init;
    let (a, b) = (run(&tex).unwrap(), run(&cv).unwrap());
    assert!(iou_either_polarity(&a.mask, &b.mask) >= 0.9);
    assert!(a.accuracy().unwrap().max(1.0 - a.accuracy().unwrap()) >= 0.95);
}
