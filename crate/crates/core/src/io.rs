//! Image and trace file formats: PGM/PPM (binary), optional PNG, cost CSV.

use std::fs;
use std::path::Path;

use crate::error::{at_path, Error, Result};
use crate::evolution::IterationRecord;
use crate::features::GrayImage;
use crate::grid::{Grid, Mask};
use crate::level_set::Polyline;
use crate::scalar::Real;

/// Overlay value of the initial contour in grayscale outputs.
pub const INITIAL_CONTOUR_GRAY: u8 = 200;
/// Overlay value of the final contour in grayscale outputs.
pub const FINAL_CONTOUR_GRAY: u8 = 255;
const INITIAL_CONTOUR_RGB: [u8; 3] = [255, 255, 0];
const FINAL_CONTOUR_RGB: [u8; 3] = [255, 0, 0];

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Parses a binary (P5) or ASCII (P2) graymap into 8-bit samples.
pub fn parse_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 255 {
        return Err(Error::Format(format!("unsupported PGM geometry {width}x{height} maxval {maxval}")));
    }
    let rescale = |v: usize| -> u8 { ((v.min(maxval) * 255 + maxval / 2) / maxval) as u8 };
    let data = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = pos + 1;
            let raster = bytes.get(start..start + width * height).ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
            raster.iter().map(|&v| rescale(v as usize)).collect()
        }
        "P2" => {
            let mut out = Vec::with_capacity(width * height);
            for _ in 0..width * height {
                out.push(rescale(num(token()?)?));
            }
            out
        }
        other => return Err(Error::Format(format!("not a PGM file (magic {other:?})"))),
    };
    Grid::from_vec(width, height, data)
}

/// Loads an 8-bit grayscale image (PGM, or PNG converted to luma) with intensities `v / 255`.
pub fn read_gray_image<T: Real>(path: &Path) -> Result<GrayImage<T>> {
    let bytes = fs::read(path).map_err(at_path(path))?;
    let grid = if extension(path) == "png" {
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            .into_luma8();
        Grid::from_vec(img.width() as usize, img.height() as usize, img.into_raw())?
    } else {
        parse_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
    };
    GrayImage::new(grid.map(|&v| T::from_count(v as usize) / T::lit(255.0)))
}

pub fn encode_pgm(samples: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", samples.width(), samples.height()).into_bytes();
    out.extend_from_slice(samples.as_slice());
    out
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

fn to_u8<T: Real>(v: T) -> u8 {
    (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn image_to_u8<T: Real>(image: &GrayImage<T>) -> Grid<u8> {
    image.grid().map(|&v| to_u8(v))
}

/// Writes a grayscale image as PGM, or PNG when the extension is `.png`.
pub fn write_gray(path: &Path, samples: &Grid<u8>) -> Result<()> {
    if extension(path) == "png" {
        image::GrayImage::from_raw(samples.width() as u32, samples.height() as u32, samples.as_slice().to_vec())
            .ok_or_else(|| Error::Format("raster size mismatch".into()))?
            .save(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    } else {
        fs::write(path, encode_pgm(samples)).map_err(at_path(path))
    }
}

/// Mask as 8-bit PGM: 255 interior, 0 exterior.
pub fn mask_to_u8(mask: &Mask) -> Grid<u8> {
    mask.map(|&m| if m { 255 } else { 0 })
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    write_gray(path, &mask_to_u8(mask))
}

/// Pixels touched by the polylines, sampled every quarter pixel.
pub fn rasterize_polylines(width: usize, height: usize, lines: &[Polyline]) -> Vec<usize> {
    let mut out = Vec::new();
    for line in lines {
        for (a, b) in line.segments() {
            let len = (b.0 - a.0).hypot(b.1 - a.1);
            let steps = (len * 4.0).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let x = (a.0 + t * (b.0 - a.0)).round();
                let y = (a.1 + t * (b.1 - a.1)).round();
                if x >= 0.0 && y >= 0.0 && (x as usize) < width && (y as usize) < height {
                    out.push(y as usize * width + x as usize);
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Draws the initial and final contours over the image. `.png` gets color (initial
/// yellow, final red); `.ppm` and `.pgm` get gray values 200 and 255.
pub fn write_overlay<T: Real>(path: &Path, image: &GrayImage<T>, initial: &[Polyline], fin: &[Polyline]) -> Result<()> {
    let (w, h) = (image.width(), image.height());
    let base = image_to_u8(image);
    let first = rasterize_polylines(w, h, initial);
    let last = rasterize_polylines(w, h, fin);
    match extension(path).as_str() {
        "png" => {
            let mut rgb: Vec<u8> = base.as_slice().iter().flat_map(|&v| [v, v, v]).collect();
            for &i in &first {
                rgb[3 * i..3 * i + 3].copy_from_slice(&INITIAL_CONTOUR_RGB);
            }
            for &i in &last {
                rgb[3 * i..3 * i + 3].copy_from_slice(&FINAL_CONTOUR_RGB);
            }
            image::RgbImage::from_raw(w as u32, h as u32, rgb)
                .ok_or_else(|| Error::Format("raster size mismatch".into()))?
                .save(path)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        }
        ext => {
            let mut gray = base.into_vec();
            for &i in &first {
                gray[i] = INITIAL_CONTOUR_GRAY;
            }
            for &i in &last {
                gray[i] = FINAL_CONTOUR_GRAY;
            }
            let bytes = if ext == "pgm" {
                encode_pgm(&Grid::from_vec(w, h, gray)?)
            } else {
                let rgb: Vec<u8> = gray.iter().flat_map(|&v| [v, v, v]).collect();
                encode_ppm(w, h, &rgb)
            };
            fs::write(path, bytes).map_err(at_path(path))
        }
    }
}

/// `iter,J,dt,reinit` with one row per iteration.
pub fn encode_cost_csv<T: Real>(records: &[IterationRecord<T>]) -> String {
    let mut out = String::from("iter,J,dt,reinit\n");
    for r in records {
        out.push_str(&format!("{},{:.17e},{:.17e},{}\n", r.iter, r.cost.to_f64_lossy(), r.dt.to_f64_lossy(), r.reinit as u8));
    }
    out
}

pub fn write_cost_csv<T: Real>(path: &Path, records: &[IterationRecord<T>]) -> Result<()> {
    fs::write(path, encode_cost_csv(records)).map_err(at_path(path))
}
