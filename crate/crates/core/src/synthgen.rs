//! Synthetic image sequences with exact ground truth.
//!
//! A skin-like texture (band-limited value noise around a skin tone) carries
//! a planted dark Gaussian blob standing in for a mole. Frame `i` samples the
//! texture at `x − dᵢ`, so content at `p` in the reference appears at
//! `p + dᵢ`; the ground truth is the blob center plus `dᵢ`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::raster::image::bilinear;
use crate::raster::{read_image, write_image, ColorSpace, PlanarImage};

/// Per-frame displacement of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// No motion.
    Still,
    /// Independent uniform jitter inside a disk of `radius` pixels; frame 0
    /// stays at the origin.
    Jitter { radius: f64, seed: u64 },
    /// `dᵢ = A·sin(2π·i/period + phase)` per axis.
    Sinusoid { amplitude: [f64; 2], period: [f64; 2], phase: [f64; 2] },
    /// Explicit offsets, one per frame.
    Explicit { offsets: Vec<[f64; 2]> },
}

/// Linear ramps of gain and offset from the first to the last frame, with
/// optional per-frame flicker and a shading gradient fixed to the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    pub gain_start: f64,
    pub gain_end: f64,
    pub offset_start: f64,
    pub offset_end: f64,
    /// Standard deviation of an independent per-frame gain factor around 1.
    #[serde(default)]
    pub flicker: f64,
    /// Relative gain change per pixel `[x, y]` away from the frame center,
    /// ramped in from zero at frame 0.
    #[serde(default)]
    pub shading: [f64; 2],
}

impl Default for Illumination {
    fn default() -> Self {
        Illumination::constant(1.0, 0.0)
    }
}

impl Illumination {
    pub fn constant(gain: f64, offset: f64) -> Self {
        Illumination::ramp(gain, gain, offset, offset)
    }

    pub fn ramp(gain_start: f64, gain_end: f64, offset_start: f64, offset_end: f64) -> Self {
        Illumination { gain_start, gain_end, offset_start, offset_end, flicker: 0.0, shading: [0.0, 0.0] }
    }
}

/// Dark Gaussian blob planted in the texture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    /// Gaussian standard deviation in pixels.
    pub radius: f64,
    /// Fractional darkening at the center, in (0, 1).
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub texture_seed: u64,
    /// Relative luminance contrast of the texture.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    pub feature: Feature,
    pub motion: Motion,
    #[serde(default)]
    pub illumination: Illumination,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Window that must stay inside every frame around the ground truth.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_contrast() -> f64 {
    0.45
}

fn default_window() -> usize {
    31
}

/// Motion regimes of the three recording conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Still subject: jitter within 1 px.
    Static,
    /// Exercise bike: sinusoidal sway within 8 px.
    Bike,
    /// Tremor: faster sway within 4 px and a 10% brightening.
    Pd,
}

impl SynthSpec {
    /// A `width`×`height` scene with the blob at the center.
    pub fn preset(regime: Regime, width: usize, height: usize, frames: usize, seed: u64) -> Self {
        let (motion, illumination) = match regime {
            Regime::Static => (Motion::Jitter { radius: 1.0, seed }, Illumination::default()),
            Regime::Bike => (
                Motion::Sinusoid { amplitude: [7.5, 2.5], period: [16.0, 23.0], phase: [0.0, 0.0] },
                Illumination::default(),
            ),
            Regime::Pd => (
                Motion::Sinusoid { amplitude: [3.0, 2.5], period: [5.0, 7.0], phase: [0.0, 0.0] },
                Illumination::ramp(1.0, 1.1, 0.0, 0.0),
            ),
        };
        SynthSpec {
            width,
            height,
            frames,
            texture_seed: seed,
            contrast: default_contrast(),
            feature: Feature {
                x: (width / 2) as f64,
                y: (height / 2) as f64,
                radius: 2.5,
                depth: 0.55,
            },
            motion,
            illumination,
            noise_sigma: 0.005,
            noise_seed: seed.wrapping_add(1),
            window: default_window(),
        }
    }

    /// Displacement of frame `i`.
    pub fn displacement(&self, i: usize) -> Result<Point> {
        Ok(match &self.motion {
            Motion::Still => Point::new(0.0, 0.0),
            Motion::Jitter { radius, seed } => {
                if i == 0 {
                    return Ok(Point::new(0.0, 0.0));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(i as u64);
                let r = radius * rng.gen::<f64>().sqrt();
                let t = rng.gen_range(0.0..2.0 * PI);
                Point::new(r * t.cos(), r * t.sin())
            }
            Motion::Sinusoid { amplitude, period, phase } => {
                let t = 2.0 * PI * i as f64;
                Point::new(
                    amplitude[0] * (t / period[0] + phase[0]).sin(),
                    amplitude[1] * (t / period[1] + phase[1]).sin(),
                )
            }
            Motion::Explicit { offsets } => {
                let o = offsets.get(i).ok_or_else(|| {
                    Error::invalid(format!("explicit motion lists {} offsets, frame {i} requested", offsets.len()))
                })?;
                Point::new(o[0], o[1])
            }
        })
    }

    fn ramp_position(&self, i: usize) -> f64 {
        if self.frames > 1 {
            i as f64 / (self.frames - 1) as f64
        } else {
            0.0
        }
    }

    /// Global gain (ramp times flicker) and offset of frame `i`.
    fn illumination_at(&self, i: usize) -> (f64, f64) {
        let t = self.ramp_position(i);
        let il = &self.illumination;
        let mut flicker = 1.0;
        if il.flicker > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed ^ 0xf11c_6e12);
            rng.set_stream(i as u64);
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            flicker = (1.0 + il.flicker * z).max(0.05);
        }
        (
            (il.gain_start + t * (il.gain_end - il.gain_start)) * flicker,
            il.offset_start + t * (il.offset_end - il.offset_start),
        )
    }

    pub fn validate(&self) -> Result<Vec<Point>> {
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::invalid("synthetic sequence needs positive size and frame count"));
        }
        if self.window.is_multiple_of(2) {
            return Err(Error::invalid("window must be odd"));
        }
        if !(self.feature.radius > 0.0) || !(0.0..1.0).contains(&self.feature.depth) {
            return Err(Error::invalid("feature radius must be positive and depth in [0, 1)"));
        }
        if self.noise_sigma < 0.0 || !(self.contrast >= 0.0) || !(self.illumination.flicker >= 0.0) {
            return Err(Error::invalid("noise sigma, contrast and flicker must be non-negative"));
        }
        let il = &self.illumination;
        if !(il.gain_start > 0.0 && il.gain_end > 0.0) {
            return Err(Error::invalid("illumination gain must be positive"));
        }
        let half = (self.window / 2) as f64;
        let mut truth = Vec::with_capacity(self.frames);
        for i in 0..self.frames {
            let d = self.displacement(i)?;
            let p = Point::new(self.feature.x + d.x, self.feature.y + d.y);
            let inside = p.x - half >= 0.0
                && p.y - half >= 0.0
                && p.x + half <= (self.width - 1) as f64
                && p.y + half <= (self.height - 1) as f64;
            if !inside || !p.is_finite() {
                return Err(Error::invalid(format!(
                    "frame {i}: feature at ({:.3}, {:.3}) leaves room for no {}x{} window in {}x{}",
                    p.x, p.y, self.window, self.window, self.width, self.height
                )));
            }
            truth.push(p);
        }
        Ok(truth)
    }
}

/// Frames and exact feature positions.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub frames: Vec<PlanarImage>,
    pub truth: Vec<Point>,
}

/// Value noise with smoothstep interpolation on a lattice of `cell` pixels.
fn value_noise(w: usize, h: usize, cell: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let fy = y as f64 / cell;
        let (y0, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for x in 0..w {
            let fx = x as f64 / cell;
            let (x0, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let v = |gx: usize, gy: usize| lattice[gy * gw + gx];
            let top = v(x0, y0) + tx * (v(x0 + 1, y0) - v(x0, y0));
            let bot = v(x0, y0 + 1) + tx * (v(x0 + 1, y0 + 1) - v(x0, y0 + 1));
            out[y * w + x] = top + ty * (bot - top);
        }
    }
    out
}

/// Skin-toned RGB01 texture of `w`×`h` with dark blobs at `features`.
pub fn skin_texture(w: usize, h: usize, seed: u64, contrast: f64, features: &[Feature]) -> PlanarImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let octaves = [(16.0, 1.0), (8.0, 0.7), (4.0, 0.5), (2.0, 0.35)];
    let mut lum = vec![0.0; w * h];
    for (cell, amp) in octaves {
        for (l, v) in lum.iter_mut().zip(value_noise(w, h, cell, &mut rng)) {
            *l += amp * v;
        }
    }
    let redness = value_noise(w, h, 12.0, &mut rng);
    let tone = [0.72, 0.54, 0.45];
    let mut data = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut shade = 1.0 + contrast * 0.4 * lum[i];
            for f in features {
                let d2 = (x as f64 - f.x).powi(2) + (y as f64 - f.y).powi(2);
                shade *= 1.0 - f.depth * (-d2 / (2.0 * f.radius * f.radius)).exp();
            }
            let red = 0.04 * redness[i];
            let rgb = [tone[0] * shade + red, tone[1] * shade, tone[2] * shade - 0.5 * red];
            for c in 0..3 {
                data[c * w * h + i] = rgb[c].clamp(0.0, 1.0);
            }
        }
    }
    PlanarImage::from_parts(w, h, ColorSpace::Rgb01, data)
}

/// Still images for autoencoder training: textures of varying contrast and
/// brightness, each sprinkled with a few blobs of random size and depth.
pub fn training_images(count: usize, width: usize, height: usize, seed: u64) -> Vec<PlanarImage> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let contrast = rng.gen_range(0.15..0.7);
            let gain = rng.gen_range(0.75..1.3);
            let blobs: Vec<Feature> = (0..rng.gen_range(2..8))
                .map(|_| Feature {
                    x: rng.gen_range(0.0..width as f64),
                    y: rng.gen_range(0.0..height as f64),
                    radius: rng.gen_range(1.5..5.0),
                    depth: rng.gen_range(0.2..0.7),
                })
                .collect();
            let tex = skin_texture(width, height, rng.gen(), contrast, &blobs);
            let data = tex.into_samples().into_iter().map(|v| (v * gain).min(1.0)).collect();
            PlanarImage::from_parts(width, height, ColorSpace::Rgb01, data)
        })
        .collect()
}

/// Renders the sequence described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<Sequence> {
    let truth = spec.validate()?;
    let disp: Vec<Point> = (0..spec.frames).map(|i| spec.displacement(i)).collect::<Result<_>>()?;
    let reach = disp.iter().map(|d| d.x.abs().max(d.y.abs())).fold(0.0, f64::max);
    let pad = reach.ceil() as usize + 2;
    let (bw, bh) = (spec.width + 2 * pad, spec.height + 2 * pad);
    let f = spec.feature;
    let base = skin_texture(
        bw,
        bh,
        spec.texture_seed,
        spec.contrast,
        &[Feature { x: f.x + pad as f64, y: f.y + pad as f64, ..f }],
    );
    let (w, h) = (spec.width, spec.height);
    let frames = (0..spec.frames)
        .into_par_iter()
        .map(|i| {
            let d = disp[i];
            let (gain, offset) = spec.illumination_at(i);
            let t = spec.ramp_position(i);
            let [gx, gy] = spec.illumination.shading.map(|g| g * t);
            let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
            rng.set_stream(i as u64);
            let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
            let mut data = vec![0.0; w * h * 3];
            for c in 0..3 {
                let plane = base.plane(c);
                for y in 0..h {
                    for x in 0..w {
                        let sx = x as f64 - d.x + pad as f64;
                        let sy = y as f64 - d.y + pad as f64;
                        let g = gain * (1.0 + gx * (x as f64 - cx) + gy * (y as f64 - cy)).max(0.0);
                        let v = (g * bilinear(plane, bw, bh, sx, sy) + offset).clamp(0.0, 1.0);
                        data[(c * h + y) * w + x] = v;
                    }
                }
            }
            if spec.noise_sigma > 0.0 {
                for v in data.iter_mut() {
                    *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            PlanarImage::from_parts(w, h, ColorSpace::Rgb01, data)
        })
        .collect();
    Ok(Sequence { frames, truth })
}

/// Writes `frame_0000.png`… and `labels.csv` (`frame,x,y`).
pub fn write_sequence(seq: &Sequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, f) in seq.frames.iter().enumerate() {
        write_image(f, dir.join(frame_name(i)))?;
    }
    write_labels(&seq.truth, dir.join("labels.csv"))
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:04}.png")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

pub fn write_labels(points: &[Point], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (frame, p) in points.iter().enumerate() {
        w.serialize(Label { frame, x: p.x, y: p.y })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `frame,x,y` CSV; rows must cover frames `0..n` in order.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize::<Label>() {
        let l = row?;
        if l.frame != out.len() {
            return Err(Error::invalid(format!("labels: expected frame {}, found {}", out.len(), l.frame)));
        }
        out.push(Point::new(l.x, l.y));
    }
    Ok(out)
}

/// Reads every raster in `dir` in file-name order.
pub fn read_frames(dir: impl AsRef<Path>) -> Result<Vec<PlanarImage>> {
    let mut paths: Vec<_> = fs::read_dir(dir.as_ref())?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    paths.retain(|p| crate::raster::is_raster_path(p));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no frames found in {}", dir.as_ref().display())));
    }
    paths.par_iter().map(read_image).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(w: usize, h: usize, frames: usize) -> SynthSpec {
        let mut s = SynthSpec::preset(Regime::Static, w, h, frames, 4);
        s.motion = Motion::Still;
        s.noise_sigma = 0.0;
        s
    }

    #[test]
    fn still_noiseless_frames_are_identical() {
        let seq = generate(&still(64, 48, 4)).unwrap();
        assert!(seq.frames.windows(2).all(|w| w[0] == w[1]));
        assert!(seq.truth.iter().all(|&p| p == Point::new(32.0, 24.0)));
    }

    #[test]
    fn frame_values_are_normalized_and_deterministic() {
        let spec = SynthSpec::preset(Regime::Pd, 64, 64, 6, 9);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x, y);
            assert!(x.samples().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    fn ncc(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut num = 0.0;
        let (mut va, mut vb) = (0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        num / (va * vb).sqrt()
    }

    #[test]
    fn subpixel_shift_is_found_by_correlation() {
        let mut spec = still(80, 80, 2);
        spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [0.25, -0.5]] };
        let seq = generate(&spec).unwrap();
        let (r, cur) = (&seq.frames[0], &seq.frames[1]);
        let half = 10i64;
        let c = Point::new(40.0, 40.0);
        let template: Vec<f64> = (0..3)
            .flat_map(|ch| {
                (-half..=half).flat_map(move |dy| (-half..=half).map(move |dx| (ch, dx, dy)))
            })
            .map(|(ch, dx, dy)| r.get((c.x as i64 + dx) as usize, (c.y as i64 + dy) as usize, ch))
            .collect();
        let mut best = (f64::MIN, Point::new(0.0, 0.0));
        for iy in -30..=30 {
            for ix in -30..=30 {
                let off = Point::new(ix as f64 * 0.05, iy as f64 * 0.05);
                let window: Vec<f64> = (0..3)
                    .flat_map(|ch| {
                        (-half..=half).flat_map(move |dy| (-half..=half).map(move |dx| (ch, dx, dy)))
                    })
                    .map(|(ch, dx, dy)| {
                        cur.sample_bilinear(ch, c.x + dx as f64 + off.x, c.y + dy as f64 + off.y).unwrap()
                    })
                    .collect();
                let score = ncc(&template, &window);
                if score > best.0 {
                    best = (score, off);
                }
            }
        }
        let truth = seq.truth[1] - seq.truth[0];
        assert!((best.1 - truth).norm() < 0.1, "peak {:?} vs {:?}", best.1, truth);
    }

    #[test]
    fn sinusoid_steps_obey_derivative_bound() {
        let spec = SynthSpec {
            motion: Motion::Sinusoid { amplitude: [6.0, 0.0], period: [20.0, 1.0], phase: [0.3, 0.0] },
            ..SynthSpec::preset(Regime::Bike, 120, 80, 60, 1)
        };
        let bound = 6.0 * 2.0 * PI / 20.0;
        let truth = spec.validate().unwrap();
        let max_step = truth.windows(2).map(|w| (w[1].x - w[0].x).abs()).fold(0.0, f64::max);
        assert!(max_step <= bound + 1e-12);
        assert!(max_step > 0.95 * bound);
    }

    #[test]
    fn illumination_only_keeps_truth_fixed() {
        let mut spec = still(64, 64, 5);
        spec.illumination = Illumination::constant(1.2, 0.05);
        let seq = generate(&spec).unwrap();
        assert!(seq.truth.iter().all(|&p| p == seq.truth[0]));
        let plain = generate(&still(64, 64, 1)).unwrap();
        assert!(seq.frames[0].samples().iter().sum::<f64>() > plain.frames[0].samples().iter().sum::<f64>());
    }

    #[test]
    fn presets_respect_their_amplitudes() {
        for (regime, limit) in [(Regime::Static, 1.0), (Regime::Bike, 8.0), (Regime::Pd, 4.0)] {
            let spec = SynthSpec::preset(regime, 96, 96, 40, 2);
            let truth = spec.validate().unwrap();
            let max = (0..40).map(|i| spec.displacement(i).unwrap().norm()).fold(0.0, f64::max);
            assert_eq!(truth[0], Point::new(48.0, 48.0));
            assert!(max <= limit + 1e-9, "{regime:?}: {max}");
        }
    }

    #[test]
    fn window_leaving_frame_is_rejected() {
        let mut spec = still(40, 40, 2);
        spec.motion = Motion::Explicit { offsets: vec![[0.0, 0.0], [6.0, 0.0]] };
        assert!(generate(&spec).is_err());
        let mut spec = still(40, 40, 1);
        spec.illumination.gain_end = 0.0;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn sequence_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let seq = generate(&SynthSpec::preset(Regime::Static, 48, 40, 3, 5)).unwrap();
        write_sequence(&seq, dir.path()).unwrap();
        let frames = read_frames(dir.path()).unwrap();
        assert_eq!(frames.len(), 3);
        let labels = read_labels(dir.path().join("labels.csv")).unwrap();
        assert_eq!(labels, seq.truth);
        let text = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
        assert!(text.starts_with("frame,x,y\n"));
    }
}
