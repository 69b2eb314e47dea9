//! Flat `key = value` configuration files and the textual forms of shapes,
//! textures and regions.
//!
//! ```text
//! # two noise textures
//! width = 128
//! height = 128
//! background = gaussian_noise:0.5,0.05
//! foreground = gaussian_noise:0.5,0.25
//! region = disk:64,64,30
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{at_path, Error, Result};
use crate::level_set::Shape;
use crate::synth::{CompositeSpec, RegionSpec, TextureSpec};

/// Keys are lowercased with `_` folded to `-`, so `max_iters` and `max-iters` agree.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored, later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_key_values(&std::fs::read_to_string(path).map_err(at_path(path))?)
}

fn split_kind(text: &str) -> Result<(String, Vec<f64>)> {
    let (kind, args) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("expected `kind:args`, got {text:?}")))?;
    let values = args
        .split(',')
        .map(|a| a.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {a:?} in {text:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((kind.trim().to_ascii_lowercase().replace('-', "_"), values))
}

fn arity(text: &str, values: &[f64], n: usize) -> Result<()> {
    if values.len() == n {
        Ok(())
    } else {
        Err(Error::Config(format!("{text:?} needs {n} numbers, got {}", values.len())))
    }
}

/// `circle:cx,cy,r`, `rectangle:x0,y0,x1,y1` or `multi_circle:spacing,r`.
pub fn parse_shape(text: &str) -> Result<Shape> {
    let (kind, v) = split_kind(text)?;
    match kind.as_str() {
        "circle" => {
            arity(text, &v, 3)?;
            Ok(Shape::Circle { cx: v[0], cy: v[1], r: v[2] })
        }
        "rectangle" | "rect" => {
            arity(text, &v, 4)?;
            Ok(Shape::Rectangle { x0: v[0], y0: v[1], x1: v[2], y1: v[3] })
        }
        "multi_circle" | "multicircle" => {
            arity(text, &v, 2)?;
            Ok(Shape::MultiCircle { spacing: v[0], r: v[1] })
        }
        other => Err(Error::Config(format!("unknown init shape {other:?}"))),
    }
}

/// `stripes:angle,period,contrast`, `checkerboard:cell,contrast`,
/// `gaussian_noise:mean,sigma` or `constant:level`.
pub fn parse_texture(text: &str) -> Result<TextureSpec> {
    let (kind, v) = split_kind(text)?;
    match kind.as_str() {
        "stripes" => {
            arity(text, &v, 3)?;
            Ok(TextureSpec::Stripes { angle_deg: v[0], period: v[1], contrast: v[2] })
        }
        "checkerboard" => {
            arity(text, &v, 2)?;
            if v[0].fract() != 0.0 || v[0] < 0.0 {
                return Err(Error::Config(format!("checkerboard cell must be an integer in {text:?}")));
            }
            Ok(TextureSpec::Checkerboard { cell: v[0] as usize, contrast: v[1] })
        }
        "gaussian_noise" | "noise" => {
            arity(text, &v, 2)?;
            Ok(TextureSpec::GaussianNoise { mean: v[0], sigma: v[1] })
        }
        "constant" => {
            arity(text, &v, 1)?;
            Ok(TextureSpec::Constant { level: v[0] })
        }
        other => Err(Error::Config(format!("unknown texture {other:?}"))),
    }
}

/// `disk:cx,cy,r`, `square:x0,y0,side` or `two_disks:cx1,cy1,r1,cx2,cy2,r2`.
pub fn parse_region(text: &str) -> Result<RegionSpec> {
    let (kind, v) = split_kind(text)?;
    match kind.as_str() {
        "disk" => {
            arity(text, &v, 3)?;
            Ok(RegionSpec::Disk { cx: v[0], cy: v[1], r: v[2] })
        }
        "square" => {
            arity(text, &v, 3)?;
            Ok(RegionSpec::Square { x0: v[0], y0: v[1], side: v[2] })
        }
        "two_disks" => {
            arity(text, &v, 6)?;
            Ok(RegionSpec::TwoDisks { a: (v[0], v[1], v[2]), b: (v[3], v[4], v[5]) })
        }
        other => Err(Error::Config(format!("unknown region {other:?}"))),
    }
}

fn required<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

fn parse_num<N: std::str::FromStr>(key: &str, text: &str) -> Result<N> {
    text.trim().parse().map_err(|_| Error::Config(format!("bad value {text:?} for `{key}`")))
}

/// Builds a composite from `width`, `height`, `background`, `foreground`, `region` and optional `seed`.
pub fn composite_from_map(map: &BTreeMap<String, String>) -> Result<CompositeSpec> {
    for key in map.keys() {
        if !matches!(key.as_str(), "width" | "height" | "background" | "foreground" | "region" | "seed") {
            return Err(Error::Config(format!("unknown synth key `{key}`")));
        }
    }
    let spec = CompositeSpec {
        width: parse_num("width", required(map, "width")?)?,
        height: parse_num("height", required(map, "height")?)?,
        background: parse_texture(required(map, "background")?)?,
        foreground: parse_texture(required(map, "foreground")?)?,
        region: parse_region(required(map, "region")?)?,
        seed: map.get("seed").map(|s| parse_num("seed", s)).transpose()?.unwrap_or(0),
    };
    spec.validate()?;
    Ok(spec)
}
