//! Command-line front end: argument parsing, config-file merging and the run driver.
//!
//! Every flag can also be given as a `key = value` line in a `--config` file;
//! flags on the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Parser;

use crate::chan_vese::{chan_vese_with, ChanVeseParams, ChanVeseStop};
use crate::config::{composite_from_map, normalize_key, parse_shape, read_key_values};
use crate::error::{Error, Result};
use crate::evolution::{evolve_with, EvolveParams, IterationRecord, StopReason};
use crate::features::GrayImage;
use crate::grid::Mask;
use crate::io::{read_gray_image, write_cost_csv, write_mask, write_overlay};
use crate::level_set::{init_signed_distance, zero_contour, LevelSet, Polyline, Shape};
use crate::synth::{generate, CompositeSpec};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage, configuration and I/O errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when a region collapsed; artifacts are still written.
pub const EXIT_COLLAPSE: i32 = 2;

#[derive(Parser, Debug, Default)]
#[command(name = "covseg", version, about = "Two-texture segmentation with SPD-manifold active contours")]
pub struct Args {
    /// Flat `key = value` file supplying any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `texture` or `chanvese`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Grayscale PGM or PNG image.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic composite description (key = value file).
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// `circle:cx,cy,r`, `rectangle:x0,y0,x1,y1` or `multi_circle:spacing,r`.
    #[arg(long)]
    pub init: Option<String>,
    /// Patch side R (odd).
    #[arg(long)]
    pub radius: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub dt0: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub reinit_period: Option<usize>,
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Overrides the seed of a synthetic composite.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Chan–Vese length weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Chan–Vese area weight.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Chan–Vese stops after this many iterations without a mask change.
    #[arg(long)]
    pub stable_iters: Option<usize>,
    /// Binary mask, PGM with 255 inside.
    #[arg(long)]
    pub out_mask: Option<PathBuf>,
    /// Image with initial and final contours, PNG or PPM.
    #[arg(long)]
    pub out_overlay: Option<PathBuf>,
    /// Cost trace CSV.
    #[arg(long)]
    pub out_cost: Option<PathBuf>,
    /// Also write an overlay every N iterations next to `--out-overlay`.
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
}

impl Args {
    /// The flags that were given, keyed like config-file entries.
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let num = |v: Option<f64>| v.map(|v| v.to_string());
        let int = |v: Option<usize>| v.map(|v| v.to_string());
        put("mode", self.mode.clone());
        put("input", path(&self.input));
        put("synth", path(&self.synth));
        put("init", self.init.clone());
        put("radius", int(self.radius));
        put("lambda", num(self.lambda));
        put("epsilon", num(self.epsilon));
        put("dt0", num(self.dt0));
        put("max-iters", int(self.max_iters));
        put("reinit-period", int(self.reinit_period));
        put("reg", num(self.reg));
        put("patience", int(self.patience));
        put("seed", self.seed.map(|v| v.to_string()));
        put("threads", int(self.threads));
        put("mu", num(self.mu));
        put("nu", num(self.nu));
        put("lambda1", num(self.lambda1));
        put("lambda2", num(self.lambda2));
        put("stable-iters", int(self.stable_iters));
        put("out-mask", path(&self.out_mask));
        put("out-overlay", path(&self.out_overlay));
        put("out-cost", path(&self.out_cost));
        put("snapshot-stride", int(self.snapshot_stride));
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Texture,
    ChanVese,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InputSource {
    File(PathBuf),
    Synth(CompositeSpec),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outputs {
    pub mask: Option<PathBuf>,
    pub overlay: Option<PathBuf>,
    pub cost: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub input: InputSource,
    /// Defaults to a centered circle of radius `min(width, height) / 4`.
    pub init: Option<Shape>,
    pub texture: EvolveParams<f64>,
    pub chan_vese: ChanVeseParams<f64>,
    pub outputs: Outputs,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(mode: Mode, input: InputSource) -> Self {
        Self {
            mode,
            input,
            init: None,
            texture: EvolveParams::default(),
            chan_vese: ChanVeseParams::default(),
            outputs: Outputs::default(),
            threads: None,
        }
    }

    /// Resolves command-line arguments, reading `--config` and `--synth` files.
    pub fn from_args(args: &Args) -> Result<Self> {
        let mut map = match &args.config {
            Some(path) => read_key_values(path)?,
            None => BTreeMap::new(),
        };
        map.extend(args.to_map());
        Self::from_map(&map)
    }

    /// Builds a configuration from normalized `key -> value` pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        const KEYS: &[&str] = &[
            "mode", "input", "synth", "init", "radius", "lambda", "epsilon", "dt0", "max-iters",
            "reinit-period", "reg", "patience", "seed", "threads", "mu", "nu", "lambda1", "lambda2",
            "stable-iters", "out-mask", "out-overlay", "out-cost", "snapshot-stride",
        ];
        let map: BTreeMap<String, String> = map.iter().map(|(k, v)| (normalize_key(k), v.clone())).collect();
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown option `{k}`")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);

        let mode = match get("mode").unwrap_or("texture") {
            "texture" => Mode::Texture,
            "chanvese" | "chan-vese" | "chan_vese" => Mode::ChanVese,
            other => return Err(Error::Config(format!("unknown mode {other:?}"))),
        };
        let input = match (get("input"), get("synth")) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `input` or `synth`, not both".into())),
            (None, None) => return Err(Error::Config("one of `input` or `synth` is required".into())),
            (Some(p), None) => InputSource::File(PathBuf::from(p)),
            (None, Some(p)) => {
                let mut spec_map = read_key_values(Path::new(p))?;
                if let Some(seed) = get("seed") {
                    spec_map.insert("seed".into(), seed.to_string());
                }
                InputSource::Synth(composite_from_map(&spec_map)?)
            }
        };

        let mut cfg = RunConfig::new(mode, input);
        cfg.init = get("init").map(parse_shape).transpose()?;

        let t = &mut cfg.texture;
        let c = &mut cfg.chan_vese;
        set(&map, "radius", &mut t.side)?;
        set(&map, "lambda", &mut t.lambda)?;
        set(&map, "reg", &mut t.reg)?;
        set(&map, "patience", &mut t.patience)?;
        set(&map, "mu", &mut c.mu)?;
        set(&map, "nu", &mut c.nu)?;
        set(&map, "lambda1", &mut c.lambda1)?;
        set(&map, "lambda2", &mut c.lambda2)?;
        set(&map, "stable-iters", &mut c.stable_iters)?;
        // shared by both flows
        set(&map, "epsilon", &mut t.epsilon)?;
        set(&map, "epsilon", &mut c.epsilon)?;
        set(&map, "dt0", &mut t.dt0)?;
        set(&map, "dt0", &mut c.dt0)?;
        set(&map, "max-iters", &mut t.max_iters)?;
        set(&map, "max-iters", &mut c.max_iters)?;
        set(&map, "reinit-period", &mut t.reinit_period)?;
        set(&map, "reinit-period", &mut c.reinit_period)?;

        cfg.threads = opt(&map, "threads")?;
        if cfg.threads == Some(0) {
            return Err(Error::Config("`threads` must be positive".into()));
        }
        cfg.outputs = Outputs {
            mask: get("out-mask").map(PathBuf::from),
            overlay: get("out-overlay").map(PathBuf::from),
            cost: get("out-cost").map(PathBuf::from),
            snapshot_stride: opt(&map, "snapshot-stride")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Texture => self.texture.validate()?,
            Mode::ChanVese => self.chan_vese.validate()?,
        }
        if let Some(stride) = self.outputs.snapshot_stride {
            if stride == 0 {
                return Err(Error::Config("`snapshot-stride` must be positive".into()));
            }
            if self.outputs.overlay.is_none() {
                return Err(Error::Config("`snapshot-stride` needs `out-overlay`".into()));
            }
        }
        Ok(())
    }
}

fn opt<N: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<N>> {
    map.get(key)
        .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("bad value {v:?} for `{key}`"))))
        .transpose()
}

fn set<N: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, slot: &mut N) -> Result<()> {
    if let Some(v) = opt(map, key)? {
        *slot = v;
    }
    Ok(())
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub mask: Mask,
    /// Generator mask when the input was synthetic.
    pub truth: Option<Mask>,
    pub iterations: usize,
    /// `J` of the returned contour (texture) or final energy (Chan–Vese).
    pub final_cost: f64,
    pub stop_reason: &'static str,
    pub collapsed: bool,
    pub elapsed: Duration,
}

impl RunSummary {
    /// Fraction of pixels agreeing with the generator mask.
    pub fn accuracy(&self) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let hits = self.mask.as_slice().iter().zip(truth.as_slice()).filter(|(a, b)| a == b).count();
        Some(hits as f64 / truth.len() as f64)
    }

    pub fn exit_code(&self) -> i32 {
        if self.collapsed {
            EXIT_COLLAPSE
        } else {
            EXIT_OK
        }
    }
}

fn default_init(width: usize, height: usize) -> Shape {
    Shape::Circle {
        cx: (width as f64 - 1.0) / 2.0,
        cy: (height as f64 - 1.0) / 2.0,
        r: width.min(height) as f64 / 4.0,
    }
}

fn snapshot_path(overlay: &Path, iter: usize) -> PathBuf {
    let stem = overlay.file_stem().and_then(|s| s.to_str()).unwrap_or("overlay");
    let ext = overlay.extension().and_then(|s| s.to_str()).unwrap_or("ppm");
    overlay.with_file_name(format!("{stem}_iter{iter:05}.{ext}"))
}

/// Writes a progress overlay when `iter` falls on the stride.
struct Snapshots<'a> {
    overlay: Option<&'a Path>,
    stride: usize,
    image: &'a GrayImage<f64>,
    initial: &'a [Polyline],
    error: Option<Error>,
}

impl Snapshots<'_> {
    fn observe(&mut self, phi: &LevelSet<f64>, iter: usize) {
        let Some(overlay) = self.overlay else { return };
        if self.error.is_some() || !iter.is_multiple_of(self.stride) {
            return;
        }
        let current = zero_contour(phi.grid());
        if let Err(e) = write_overlay(&snapshot_path(overlay, iter), self.image, self.initial, &current) {
            self.error = Some(e);
        }
    }
}

/// Loads the input, runs the selected flow and writes the requested artifacts.
///
/// Input is loaded and validated before anything is written, so a failed load
/// leaves no files behind. A collapse still writes artifacts and is reported
/// through [`RunSummary::collapsed`].
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &RunConfig) -> Result<RunSummary> {
    let (image, truth) = match &config.input {
        InputSource::File(path) => (read_gray_image::<f64>(path)?, None),
        InputSource::Synth(spec) => {
            let (img, mask) = generate::<f64>(spec)?;
            (img, Some(mask))
        }
    };
    let (w, h) = (image.width(), image.height());
    let init = config.init.unwrap_or_else(|| default_init(w, h));
    let phi0: LevelSet<f64> = init_signed_distance(&init, w, h)?;
    let initial = zero_contour(phi0.grid());
    let mut snaps = Snapshots {
        overlay: config.outputs.snapshot_stride.and(config.outputs.overlay.as_deref()),
        stride: config.outputs.snapshot_stride.unwrap_or(1),
        image: &image,
        initial: &initial,
        error: None,
    };

    let (mask, contours, trace, iterations, final_cost, stop_reason, collapsed, elapsed) = match config.mode {
        Mode::Texture => {
            let r = evolve_with(&image, &init, &config.texture, |st, rec| snaps.observe(&st.phi, rec.iter))?;
            log::info!(
                "texture flow: {} iterations, best J {:.6} at iteration {}, {}",
                r.iterations,
                r.best_cost(),
                r.best_iter,
                r.stop_reason.as_str()
            );
            let collapsed = r.stop_reason == StopReason::Collapse;
            let cost = r.best_cost();
            (r.mask, r.contours, r.trace, r.iterations, cost, r.stop_reason.as_str(), collapsed, r.elapsed)
        }
        Mode::ChanVese => {
            let r = chan_vese_with(&image, &init, &config.chan_vese, |phi, rec| snaps.observe(phi, rec.iter))?;
            log::info!("chan-vese: {} iterations, c1 {:.4}, c2 {:.4}, {}", r.iterations, r.c1, r.c2, r.stop_reason.as_str());
            let collapsed = r.stop_reason == ChanVeseStop::Collapse;
            let cost = r.trace.last().map_or(f64::NAN, |t: &IterationRecord<f64>| t.cost);
            (r.mask, r.contours, r.trace, r.iterations, cost, r.stop_reason.as_str(), collapsed, r.elapsed)
        }
    };
    if let Some(e) = snaps.error {
        return Err(e);
    }

    if let Some(path) = &config.outputs.mask {
        write_mask(path, &mask)?;
    }
    if let Some(path) = &config.outputs.overlay {
        write_overlay(path, &image, &initial, &contours)?;
    }
    if let Some(path) = &config.outputs.cost {
        write_cost_csv(path, &trace)?;
    }
    Ok(RunSummary { mask, truth, iterations, final_cost, stop_reason, collapsed, elapsed })
}

/// Parses `args`, runs, prints a one-line result and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunConfig::from_args(&args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(summary) => {
            let mut line = format!(
                "stop={} iterations={} cost={:.6} elapsed={:.2}s",
                summary.stop_reason,
                summary.iterations,
                summary.final_cost,
                summary.elapsed.as_secs_f64()
            );
            if let Some(acc) = summary.accuracy() {
                line += &format!(" accuracy={acc:.4}");
            }
            println!("{line}");
            if summary.collapsed {
                eprintln!("error: a region collapsed; artifacts reflect the last valid contour");
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Collapse(_)) {
                EXIT_COLLAPSE
            } else {
                EXIT_ERROR
            }
        }
    }
}
