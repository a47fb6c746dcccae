//! Deterministic synthetic infrared sequences with exact ground truth.
//!
//! A frame is a periodic low-pass clutter texture, shifted by the
//! accumulated drift plus a per-frame integer jitter, with a Gaussian target
//! blob added on a linear trajectory and white Gaussian sensor noise on top.
//! Values are clamped to `[0, 1]` and quantized to 16 bits, so the frames
//! held in memory are exactly the frames read back from disk.
//!
//! Randomness comes from ChaCha8 seeded with `seed`: stream 0 draws the
//! clutter texture, stream `f + 1` draws frame `f`'s jitter and noise. Any
//! frame can therefore be rendered independently of the others.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::GroundTruthRecord;
use crate::error::{Error, Result};
use crate::io::{quantize_u16, write_ground_truth, write_png16};
use crate::plane::{Frame, Plane, MIN_FRAME_SIDE};

/// Minimum distance between the target centre and any border.
pub const TRAJECTORY_MARGIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    /// Box-blur radius of the clutter texture in pixels; 0 leaves it white.
    pub smoothness: usize,
    /// Background motion in pixels per frame `(dx, dy)`.
    pub drift: [f64; 2],
    /// Bound on the per-frame integer jitter offset.
    pub jitter_amp: u32,
    /// Mean intensity.
    pub level: f64,
    /// Peak deviation of the clutter texture from `level`.
    pub clutter: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            smoothness: 3,
            drift: [0.6, 0.3],
            jitter_amp: 0,
            level: 0.35,
            clutter: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Peak contrast added above the local background; 0 renders no target.
    pub amplitude: f64,
    /// Standard deviation of the Gaussian point-spread function.
    pub psf_sigma: f64,
    pub velocity: [f64; 2],
    pub start: [f64; 2],
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            amplitude: 0.25,
            psf_sigma: 1.0,
            velocity: [0.8, 0.5],
            start: [40.0, 60.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    pub background: BackgroundConfig,
    pub target: TargetConfig,
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 256,
            height: 256,
            frames: 200,
            seed: 0,
            background: BackgroundConfig::default(),
            target: TargetConfig::default(),
            noise_sigma: 0.01,
        }
    }
}

/// Scene families modelled on real sequences: a drifting ground-sky
/// background, a jittering platform, and a static sky.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Drift,
    Jitter,
    Static,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drift" => Ok(Preset::Drift),
            "jitter" => Ok(Preset::Jitter),
            "static" => Ok(Preset::Static),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset {other:?}, expected drift, jitter or static"
            ))),
        }
    }
}

impl SynthConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = SynthConfig::default();
        match preset {
            Preset::Drift => base,
            Preset::Jitter => SynthConfig {
                background: BackgroundConfig {
                    drift: [0.3, 0.0],
                    jitter_amp: 2,
                    ..base.background
                },
                ..base
            },
            Preset::Static => SynthConfig {
                background: BackgroundConfig {
                    drift: [0.0, 0.0],
                    jitter_amp: 0,
                    smoothness: 6,
                    level: 0.3,
                    clutter: 0.1,
                },
                ..base
            },
        }
    }

    /// Target centre at frame `f`.
    pub fn target_center(&self, f: usize) -> (f64, f64) {
        let t = &self.target;
        (
            t.start[0] + f as f64 * t.velocity[0],
            t.start[1] + f as f64 * t.velocity[1],
        )
    }

    /// Side of the ground-truth box, `ceil(6 sigma)`.
    pub fn box_side(&self) -> f64 {
        (6.0 * self.target.psf_sigma).ceil()
    }

    pub fn has_target(&self) -> bool {
        self.target.amplitude > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width < MIN_FRAME_SIDE || self.height < MIN_FRAME_SIDE {
            return bad(format!(
                "frame size {}x{} below {MIN_FRAME_SIDE}",
                self.width, self.height
            ));
        }
        if self.frames == 0 {
            return bad("need at least one frame".into());
        }
        let t = &self.target;
        if !(t.amplitude >= 0.0 && t.amplitude.is_finite()) {
            return bad(format!(
                "target amplitude must be >= 0, got {}",
                t.amplitude
            ));
        }
        if !(t.psf_sigma > 0.0 && t.psf_sigma.is_finite()) {
            return bad(format!("psf_sigma must be > 0, got {}", t.psf_sigma));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        let b = &self.background;
        if !(b.drift.iter().all(|d| d.is_finite()) && b.level.is_finite() && b.clutter.is_finite())
        {
            return bad("background parameters must be finite".into());
        }
        let half = (self.box_side() / 2.0).max(TRAJECTORY_MARGIN);
        for f in [0, self.frames - 1] {
            let (cx, cy) = self.target_center(f);
            let inside = |c: f64, len: usize| c >= half && c <= (len - 1) as f64 - half;
            if !(inside(cx, self.width) && inside(cy, self.height)) {
                return bad(format!(
                    "target at frame {f} ({cx:.2}, {cy:.2}) is within {half} px of the border"
                ));
            }
        }
        Ok(())
    }
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// In-place periodic box blur along rows.
fn wrap_blur_rows(data: &mut [f64], width: usize, radius: usize) {
    let norm = (2 * radius + 1) as f64;
    let mut scratch = vec![0.0; width];
    for row in data.chunks_mut(width) {
        for (x, out) in scratch.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..=2 * radius {
                acc += row[(x + width * (radius + 1) + k - radius) % width];
            }
            *out = acc / norm;
        }
        row.copy_from_slice(&scratch);
    }
}

fn transpose(data: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = data[y * width + x];
        }
    }
    out
}

/// Zero-mean periodic texture scaled to a peak magnitude of 1.
fn clutter_texture(rng: &mut ChaCha8Rng, width: usize, height: usize, radius: usize) -> Vec<f64> {
    let mut tex: Vec<f64> = (0..width * height)
        .map(|_| rng.random::<f64>() - 0.5)
        .collect();
    if radius > 0 {
        // three passes approximate a Gaussian kernel
        for _ in 0..3 {
            wrap_blur_rows(&mut tex, width, radius);
            let mut t = transpose(&tex, width, height);
            wrap_blur_rows(&mut t, height, radius);
            tex = transpose(&t, height, width);
        }
    }
    let mean = tex.iter().sum::<f64>() / tex.len() as f64;
    tex.iter_mut().for_each(|v| *v -= mean);
    let peak = tex.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        tex.iter_mut().for_each(|v| *v /= peak);
    }
    tex
}

/// Renders frames and ground truth for one configuration.
#[derive(Clone, Debug)]
pub struct Synthesizer {
    cfg: SynthConfig,
    background: Vec<f64>,
}

/// Files produced by [`Synthesizer::write`].
#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub frames: Vec<PathBuf>,
    pub ground_truth: PathBuf,
}

pub const GROUND_TRUTH_FILE: &str = "gt.csv";

pub fn frame_file_name(f: usize) -> String {
    format!("frame_{f:04}.png")
}

impl Synthesizer {
    pub fn new(cfg: SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = frame_rng(cfg.seed, 0);
        let tex = clutter_texture(&mut rng, cfg.width, cfg.height, cfg.background.smoothness);
        let b = &cfg.background;
        let background = tex.iter().map(|v| b.level + b.clutter * v).collect();
        Ok(Synthesizer { cfg, background })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    /// Integer background offset of frame `f`: rounded accumulated drift plus jitter.
    pub fn background_offset(&self, f: usize) -> (i64, i64) {
        let b = &self.cfg.background;
        let (mut jx, mut jy) = (0i64, 0i64);
        if b.jitter_amp > 0 {
            let mut rng = frame_rng(self.cfg.seed, f as u64 + 1);
            let a = b.jitter_amp as i64;
            jx = rng.random_range(-a..=a);
            jy = rng.random_range(-a..=a);
        }
        (
            (f as f64 * b.drift[0]).round() as i64 + jx,
            (f as f64 * b.drift[1]).round() as i64 + jy,
        )
    }

    /// 16-bit samples of frame `f`.
    pub fn render_samples(&self, f: usize) -> Vec<u16> {
        let SynthConfig {
            width: w,
            height: h,
            ..
        } = self.cfg;
        let (ox, oy) = self.background_offset(f);
        let mut rng = frame_rng(self.cfg.seed, f as u64 + 1);
        if self.cfg.background.jitter_amp > 0 {
            // skip the two jitter draws so noise does not reuse them
            let a = self.cfg.background.jitter_amp as i64;
            let _: (i64, i64) = (rng.random_range(-a..=a), rng.random_range(-a..=a));
        }

        let mut img = vec![0.0f64; w * h];
        for y in 0..h {
            let sy = (y as i64 - oy).rem_euclid(h as i64) as usize;
            let src = &self.background[sy * w..(sy + 1) * w];
            for x in 0..w {
                let sx = (x as i64 - ox).rem_euclid(w as i64) as usize;
                img[y * w + x] = src[sx];
            }
        }

        let t = &self.cfg.target;
        if t.amplitude > 0.0 {
            let (cx, cy) = self.cfg.target_center(f);
            let reach = (4.0 * t.psf_sigma).ceil();
            let two_s2 = 2.0 * t.psf_sigma * t.psf_sigma;
            let x0 = (cx - reach).floor().max(0.0) as usize;
            let x1 = ((cx + reach).ceil() as usize).min(w - 1);
            let y0 = (cy - reach).floor().max(0.0) as usize;
            let y1 = ((cy + reach).ceil() as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                    img[y * w + x] += t.amplitude * (-d2 / two_s2).exp();
                }
            }
        }

        if self.cfg.noise_sigma > 0.0 {
            for v in img.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v += self.cfg.noise_sigma * n;
            }
        }

        img.iter().map(|&v| quantize_u16(v)).collect()
    }

    pub fn frame(&self, f: usize) -> Frame {
        let samples = self.render_samples(f);
        let pixels = Plane::new(
            self.cfg.width,
            self.cfg.height,
            samples.iter().map(|&s| s as f64 / 65535.0).collect(),
        )
        .expect("render produces width*height samples");
        Frame::new(f as u64, pixels).expect("validated size and clamped range")
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        (0..self.cfg.frames).map(move |f| self.frame(f))
    }

    /// Ground truth for frame `f`; empty when the scene has no target.
    pub fn ground_truth(&self, f: usize) -> Vec<GroundTruthRecord> {
        if !self.cfg.has_target() {
            return Vec::new();
        }
        let (cx, cy) = self.cfg.target_center(f);
        let side = self.cfg.box_side();
        vec![GroundTruthRecord {
            frame_index: f as u64,
            cx,
            cy,
            w: side,
            h: side,
        }]
    }

    pub fn all_ground_truth(&self) -> Vec<GroundTruthRecord> {
        (0..self.cfg.frames)
            .flat_map(|f| self.ground_truth(f))
            .collect()
    }

    /// Writes `frame_NNNN.png` (16-bit) for every frame and `gt.csv`.
    pub fn write(&self, out_dir: &Path) -> Result<SynthOutput> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let frames = (0..self.cfg.frames)
            .into_par_iter()
            .map(|f| {
                let path = out_dir.join(frame_file_name(f));
                write_png16(
                    &path,
                    self.cfg.width,
                    self.cfg.height,
                    &self.render_samples(f),
                )?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()?;
        let ground_truth = out_dir.join(GROUND_TRUTH_FILE);
        write_ground_truth(&ground_truth, &self.all_ground_truth())?;
        Ok(SynthOutput {
            frames,
            ground_truth,
        })
    }
}
