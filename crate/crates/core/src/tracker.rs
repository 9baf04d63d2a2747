//! Frame-by-frame tracking and track evaluation.
//!
//! Tracking is repeated single-frame matching. Under [`Mode::FixedReference`]
//! every frame is matched against the descriptor taken from frame 0; under
//! [`Mode::PreviousFrame`] the reference is re-extracted at each new
//! prediction, which lets errors accumulate.
//!
//! Evaluation charges every frame a standardized squared error under an
//! [`ErrorModel`]; the running sum is compared with the 99% χ² line for
//! `2i` degrees of freedom.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalstat::{chi2_inv, standardized_squared_error, weighted_error, EmpiricalCdf, ErrorModel, FrameError};
use crate::flow_lk::{flow_pyramid, lk_pyramidal_on, FlowWindow};
use crate::geom::{Pixel, Point};
use crate::matchcore::{
    match_feature, position_grid, ssr_landscape, unmatched_error, DenseDescriber, Descriptor, SsrLandscape,
};
use crate::raster::{to_grayscale, ColorSpace, ImagePyramid, PlanarImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedReference,
    PreviousFrame,
}

/// What an unmatched frame is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnmatchedPolicy {
    /// The image diagonal, whatever the held prediction.
    AssignDiagonal,
    /// The distance of the held prediction from the truth.
    HoldLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackScheme {
    pub mode: Mode,
    pub unmatched: UnmatchedPolicy,
    /// Frames whose nearest-neighbor ratio exceeds this are unmatched.
    pub ratio_threshold: Option<f64>,
    /// In previous-frame mode, keep the last reference descriptor across
    /// unmatched frames instead of re-extracting at the held position.
    pub hold_descriptor: bool,
    /// Restrict the search to centers within this many pixels (Chebyshev)
    /// of the last prediction.
    pub search_radius: Option<usize>,
}

impl Default for TrackScheme {
    fn default() -> Self {
        TrackScheme {
            mode: Mode::FixedReference,
            unmatched: UnmatchedPolicy::AssignDiagonal,
            ratio_threshold: None,
            hold_descriptor: true,
            search_radius: None,
        }
    }
}

impl TrackScheme {
    pub fn fixed() -> Self {
        Self::default()
    }

    pub fn previous() -> Self {
        TrackScheme { mode: Mode::PreviousFrame, ..Self::default() }
    }

    pub fn with_ratio_threshold(mut self, t: f64) -> Self {
        self.ratio_threshold = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.ratio_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid(format!("ratio threshold must lie in (0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

/// How a frame is matched.
#[derive(Clone, Copy)]
pub enum Matcher<'a> {
    /// Dense SSR matching with any descriptor (learned encoder, raw pixels).
    Descriptor(&'a dyn DenseDescriber),
    /// Pyramidal Lucas-Kanade on the grayscale frames.
    Lk(FlowWindow),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameStatus {
    /// Frame 0, where the reference is taken.
    Reference,
    Matched,
    /// Rejected by the ratio test or by a failed flow solve; the last
    /// prediction is held.
    Unmatched,
    /// The reference window no longer fits; the last prediction is held.
    OutOfBounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub prediction: Point,
    pub status: FrameStatus,
    /// Raw matcher output before any hold; `None` when nothing was matched.
    pub matched: Option<Point>,
    pub nn_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub width: usize,
    pub height: usize,
    pub records: Vec<FrameRecord>,
}

impl Track {
    pub fn predictions(&self) -> Vec<Point> {
        self.records.iter().map(|r| r.prediction).collect()
    }

    pub fn diagonal(&self) -> f64 {
        unmatched_error(self.width as f64, self.height as f64)
    }

    /// Per-frame errors of frames `1..` against `truth`. Unmatched frames
    /// under [`UnmatchedPolicy::AssignDiagonal`] are charged `(w, h)`.
    pub fn errors(&self, truth: &[Point], policy: UnmatchedPolicy) -> Result<Vec<FrameError>> {
        if truth.len() != self.records.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} frames",
                truth.len(),
                self.records.len()
            )));
        }
        Ok(self
            .records
            .iter()
            .zip(truth)
            .skip(1)
            .map(|(r, t)| {
                let unmatched = matches!(r.status, FrameStatus::Unmatched | FrameStatus::OutOfBounds);
                if unmatched && policy == UnmatchedPolicy::AssignDiagonal {
                    FrameError::new(r.frame, self.width as f64, self.height as f64)
                } else {
                    FrameError::new(r.frame, r.prediction.x - t.x, r.prediction.y - t.y)
                }
            })
            .collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            frame: usize,
            pred_x: f64,
            pred_y: f64,
            status: FrameStatus,
            nn_ratio: Option<f64>,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                frame: r.frame,
                pred_x: r.prediction.x,
                pred_y: r.prediction.y,
                status: r.status,
                nn_ratio: r.nn_ratio,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pixel_of(p: Point, what: &str) -> Result<Pixel> {
    p.round_to_pixel()
        .ok_or_else(|| Error::invalid(format!("{what} {p} is outside the image")))
}

/// Axis-aligned sub-image; `x0, y0` is its top-left pixel.
fn sub_image(img: &PlanarImage, x0: usize, y0: usize, w: usize, h: usize) -> PlanarImage {
    let mut data = Vec::with_capacity(w * h * img.channels());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for y in y0..y0 + h {
            data.extend_from_slice(&plane[y * img.width() + x0..y * img.width() + x0 + w]);
        }
    }
    PlanarImage::from_parts(w, h, img.space(), data)
}

struct FrameMatch {
    position: Point,
    nn_ratio: f64,
}

/// Matches `reference` over `current` (prepared), optionally restricted to a
/// square region around `around`.
fn match_descriptor(
    describer: &dyn DenseDescriber,
    reference: &Descriptor,
    current: &PlanarImage,
    around: Point,
    radius: Option<usize>,
) -> Result<FrameMatch> {
    let half = describer.window() / 2;
    let (x0, y0, w, h) = match radius {
        None => (0, 0, current.width(), current.height()),
        Some(r) => {
            let c = pixel_of(around, "search center")?;
            let reach = r + half + 1;
            let x0 = c.x.saturating_sub(reach);
            let y0 = c.y.saturating_sub(reach);
            let x1 = (c.x + reach + 1).min(current.width());
            let y1 = (c.y + reach + 1).min(current.height());
            (x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
        }
    };
    let region;
    let img = if (x0, y0, w, h) == (0, 0, current.width(), current.height()) {
        current
    } else {
        region = sub_image(current, x0, y0, w, h);
        &region
    };
    let grid = position_grid(img.width(), img.height(), describer.window(), 1)?;
    let set = describer.describe_grid(img, &grid)?;
    let land = ssr_landscape(reference, &grid, &set)?;
    let m = match_feature(&land)?;
    Ok(FrameMatch {
        position: m.subpixel_pos + Point::new(x0 as f64, y0 as f64),
        nn_ratio: m.nn_ratio,
    })
}

fn check_frames(frames: &[PlanarImage]) -> Result<(usize, usize)> {
    let first = frames.first().ok_or_else(|| Error::invalid("cannot track an empty sequence"))?;
    let (w, h) = (first.width(), first.height());
    if frames.iter().any(|f| f.width() != w || f.height() != h || f.space() != first.space()) {
        return Err(Error::invalid("all frames must share size and color space"));
    }
    Ok((w, h))
}

/// Tracks `start` (a position in frame 0) through `frames`.
pub fn track(frames: &[PlanarImage], start: Point, matcher: Matcher<'_>, scheme: &TrackScheme) -> Result<Track> {
    scheme.validate()?;
    let (width, height) = check_frames(frames)?;
    let first = FrameRecord {
        frame: 0,
        prediction: start,
        status: FrameStatus::Reference,
        matched: Some(start),
        nn_ratio: None,
    };
    let mut records = vec![first];
    match matcher {
        Matcher::Descriptor(d) => track_descriptor(frames, start, d, scheme, &mut records)?,
        Matcher::Lk(win) => track_lk(frames, start, &win, scheme, &mut records)?,
    }
    Ok(Track { width, height, records })
}

fn accept(scheme: &TrackScheme, ratio: f64) -> bool {
    scheme.ratio_threshold.is_none_or(|t| ratio <= t)
}

fn track_descriptor(
    frames: &[PlanarImage],
    start: Point,
    describer: &dyn DenseDescriber,
    scheme: &TrackScheme,
    records: &mut Vec<FrameRecord>,
) -> Result<()> {
    let window = describer.window();
    let prepared: Vec<PlanarImage> = frames.par_iter().map(|f| describer.prepare(f)).collect::<Result<_>>()?;
    let start_px = pixel_of(start, "start")?;
    if !prepared[0].window_fits(start_px, window) {
        return Err(Error::invalid(format!(
            "start {start} does not admit a {window}x{window} window in frame 0"
        )));
    }
    let reference = describer.describe(&prepared[0], start_px)?;
    // The reference window sits on a pixel; the tracked point keeps its
    // subpixel offset from that pixel.
    let carry = start - start_px.to_point();

    if scheme.mode == Mode::FixedReference {
        let matches: Vec<FrameMatch> = prepared[1..]
            .par_iter()
            .map(|cur| match_descriptor(describer, &reference, cur, start, scheme.search_radius))
            .collect::<Result<_>>()?;
        let mut last = start;
        for (i, m) in matches.into_iter().enumerate() {
            let position = m.position + carry;
            let ok = accept(scheme, m.nn_ratio);
            if ok {
                last = position;
            }
            records.push(FrameRecord {
                frame: i + 1,
                prediction: last,
                status: if ok { FrameStatus::Matched } else { FrameStatus::Unmatched },
                matched: Some(position),
                nn_ratio: Some(m.nn_ratio),
            });
        }
        return Ok(());
    }

    let (mut reference, mut carry) = (reference, carry);
    let mut last = start;
    for (i, cur) in prepared.iter().enumerate().skip(1) {
        let m = match_descriptor(describer, &reference, cur, last, scheme.search_radius)?;
        let position = m.position + carry;
        let ok = accept(scheme, m.nn_ratio);
        let mut status = if ok { FrameStatus::Matched } else { FrameStatus::Unmatched };
        if ok {
            last = position;
        }
        if ok || !scheme.hold_descriptor {
            match last.round_to_pixel().filter(|&p| cur.window_fits(p, window)) {
                Some(p) => {
                    reference = describer.describe(cur, p)?;
                    carry = last - p.to_point();
                }
                None => status = FrameStatus::OutOfBounds,
            }
        }
        records.push(FrameRecord {
            frame: i,
            prediction: last,
            status,
            matched: Some(position),
            nn_ratio: Some(m.nn_ratio),
        });
    }
    Ok(())
}

fn gray_pyramid(frame: &PlanarImage, win: &FlowWindow) -> Result<ImagePyramid> {
    match frame.space() {
        ColorSpace::Gray01 => flow_pyramid(frame, win),
        _ => flow_pyramid(&to_grayscale(frame)?, win),
    }
}

fn track_lk(
    frames: &[PlanarImage],
    start: Point,
    win: &FlowWindow,
    scheme: &TrackScheme,
    records: &mut Vec<FrameRecord>,
) -> Result<()> {
    let fitted = win.fitted_to(frames[0].width(), frames[0].height());
    if fitted.max_level != win.max_level {
        log::warn!("frames too small for {} pyramid levels, using {}", win.max_level, fitted.max_level);
    }
    let win = &fitted;
    let pyramids: Vec<ImagePyramid> = frames.par_iter().map(|f| gray_pyramid(f, win)).collect::<Result<_>>()?;
    let record = |frame, last: Point, res: &crate::flow_lk::FlowResult| {
        let ok = !res.status.is_failure();
        FrameRecord {
            frame,
            prediction: if ok { res.position } else { last },
            status: if ok { FrameStatus::Matched } else { FrameStatus::Unmatched },
            matched: ok.then_some(res.position),
            nn_ratio: None,
        }
    };
    match scheme.mode {
        Mode::FixedReference => {
            let results: Vec<_> = pyramids[1..]
                .par_iter()
                .map(|cur| lk_pyramidal_on(&pyramids[0], cur, start, start, win))
                .collect();
            let mut last = start;
            for (i, res) in results.iter().enumerate() {
                let r = record(i + 1, last, res);
                last = r.prediction;
                records.push(r);
            }
        }
        Mode::PreviousFrame => {
            let mut anchor = (0, start);
            let mut last = start;
            for i in 1..frames.len() {
                let res = lk_pyramidal_on(&pyramids[anchor.0], &pyramids[i], anchor.1, last, win);
                let r = record(i, last, &res);
                if r.status == FrameStatus::Matched {
                    anchor = (i, r.prediction);
                } else if !scheme.hold_descriptor {
                    anchor = (i - 1, last);
                }
                last = r.prediction;
                records.push(r);
            }
        }
    }
    Ok(())
}

/// 99% χ² line: entry `i − 1` is `chi2_inv(0.99, 2i)`.
pub fn ci_line(n_frames: usize) -> Result<Vec<f64>> {
    if n_frames == 0 {
        return Err(Error::invalid("ci_line needs at least one frame"));
    }
    (1..=n_frames).map(|i| chi2_inv(0.99, 2.0 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub frame: usize,
    pub pred_x: Option<f64>,
    pub pred_y: Option<f64>,
    pub err_px: f64,
    pub e_std: f64,
    pub cumulative: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub condition: String,
    pub rows: Vec<ReportRow>,
    pub sorted_errors: Vec<f64>,
    pub mean_error: f64,
    pub max_error: f64,
    /// Infinite when an error lies beyond every simulated labelling error.
    pub weighted_mean_error: f64,
    pub diverged: bool,
    /// First frame whose cumulative error exceeds the 99% line.
    pub ci_crossing: Option<usize>,
}

/// Summarizes per-frame errors. `diagonal` is the unmatched charge used to
/// flag divergence.
pub fn report(errors: &[FrameError], model: &ErrorModel, cdf: &EmpiricalCdf, diagonal: Option<f64>) -> Result<TrackReport> {
    if errors.is_empty() {
        return Err(Error::invalid("cannot report on an empty error list"));
    }
    model.validate()?;
    let ci = ci_line(errors.len())?;
    let mut cumulative = 0.0;
    let mut rows = Vec::with_capacity(errors.len());
    for (e, &c) in errors.iter().zip(&ci) {
        let e_std = standardized_squared_error(e, model);
        cumulative += e_std;
        rows.push(ReportRow {
            frame: e.frame,
            pred_x: None,
            pred_y: None,
            err_px: e.distance(),
            e_std,
            cumulative,
            ci: c,
        });
    }
    let dist: Vec<f64> = errors.iter().map(FrameError::distance).collect();
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite tracking error".into()));
    }
    let mut sorted_errors = dist.clone();
    sorted_errors.sort_by(|a, b| b.total_cmp(a));
    let n = dist.len() as f64;
    let diverged = diagonal.is_some_and(|d| dist.iter().any(|&e| (e - d).abs() <= 1e-9 * d.max(1.0)));
    Ok(TrackReport {
        condition: model.condition.clone(),
        ci_crossing: rows.iter().find(|r| r.cumulative > r.ci).map(|r| r.frame),
        sorted_errors,
        mean_error: dist.iter().sum::<f64>() / n,
        max_error: dist.iter().cloned().fold(0.0, f64::max),
        weighted_mean_error: dist.iter().map(|&e| weighted_error(e, cdf)).sum::<f64>() / n,
        diverged,
        rows,
    })
}

/// Evaluates a track against ground truth.
pub fn evaluate(
    track: &Track,
    truth: &[Point],
    policy: UnmatchedPolicy,
    model: &ErrorModel,
    cdf: &EmpiricalCdf,
) -> Result<TrackReport> {
    let errors = track.errors(truth, policy)?;
    let mut rep = report(&errors, model, cdf, Some(track.diagonal()))?;
    for (row, rec) in rep.rows.iter_mut().zip(&track.records[1..]) {
        row.pred_x = Some(rec.prediction.x);
        row.pred_y = Some(rec.prediction.y);
    }
    Ok(rep)
}

impl TrackReport {
    /// Per-frame CSV: `frame,pred_x,pred_y,err_px,e_std,cumulative,ci`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

/// Number of best-ranked landscape centers lying within `threshold` pixels of
/// `truth` before the first one that does not.
pub fn nn_within_threshold(land: &SsrLandscape, truth: Point, threshold: f64) -> Result<usize> {
    if land.is_empty() {
        return Err(Error::invalid("empty landscape"));
    }
    let grid = land.grid();
    Ok(land
        .ranked()
        .into_iter()
        .take_while(|&i| grid.center(grid.coord(i)).to_point().distance(truth) <= threshold)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalstat::simulate_distance_cdf;
    use crate::matchcore::RawPixelDescriber;
    use crate::synthgen::{generate, Motion, Regime, SynthSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn model() -> ErrorModel {
        ErrorModel::by_name("static-face-mole").unwrap()
    }

    fn cdf() -> EmpiricalCdf {
        simulate_distance_cdf(&model(), 20_000, 1).unwrap()
    }

    fn spec(frames: usize, motion: Motion) -> SynthSpec {
        let mut s = SynthSpec::preset(Regime::Static, 72, 64, frames, 11);
        s.noise_sigma = 0.0;
        s.motion = motion;
        s
    }

    #[test]
    fn constant_sequence_is_stationary_for_every_matcher() {
        let seq = generate(&spec(4, Motion::Still)).unwrap();
        let raw = RawPixelDescriber::default();
        let start = seq.truth[0];
        for matcher in [Matcher::Descriptor(&raw), Matcher::Lk(FlowWindow::default())] {
            for scheme in [TrackScheme::fixed(), TrackScheme::previous()] {
                let t = track(&seq.frames, start, matcher, &scheme).unwrap();
                for p in t.predictions() {
                    assert!(p.distance(start) < 1e-9, "{p}");
                }
                let errs = t.errors(&seq.truth, UnmatchedPolicy::AssignDiagonal).unwrap();
                assert!(errs.iter().all(|e| e.distance() < 1e-9));
            }
        }
    }

    #[test]
    fn integer_shifts_are_recovered() {
        let offsets = vec![[0.0, 0.0], [2.0, 0.0], [-1.0, 3.0], [3.0, -2.0]];
        let seq = generate(&spec(4, Motion::Explicit { offsets })).unwrap();
        let raw = RawPixelDescriber::default();
        let t = track(&seq.frames, seq.truth[0], Matcher::Descriptor(&raw), &TrackScheme::fixed()).unwrap();
        for (p, truth) in t.predictions().iter().zip(&seq.truth) {
            assert!(p.distance(*truth) < 1.5, "{p} vs {truth}");
        }
    }

    #[test]
    fn two_frame_sequences_agree_across_schemes() {
        let seq = generate(&spec(2, Motion::Explicit { offsets: vec![[0.0, 0.0], [1.3, -0.7]] })).unwrap();
        let raw = RawPixelDescriber::default();
        for m in [Matcher::Descriptor(&raw), Matcher::Lk(FlowWindow::default())] {
            let a = track(&seq.frames, seq.truth[0], m, &TrackScheme::fixed()).unwrap();
            let b = track(&seq.frames, seq.truth[0], m, &TrackScheme::previous()).unwrap();
            assert_eq!(a.predictions(), b.predictions());
        }
    }

    #[test]
    fn twin_features_are_unmatched_under_ratio_test() {
        // Two identical copies of the patch around (20, 32) side by side.
        let base = generate(&spec(1, Motion::Still)).unwrap().frames.remove(0);
        let (w, h) = (base.width(), base.height());
        let twin = PlanarImage::from_fn(w, h, ColorSpace::Rgb01, |x, y, c| {
            let sx = if x >= 36 { x - 36 } else { x };
            base.get(sx, y, c)
        })
        .unwrap();
        let frames = vec![twin.clone(), twin.clone(), twin];
        let raw = RawPixelDescriber::default();
        let scheme = TrackScheme::fixed().with_ratio_threshold(0.8);
        let start = Point::new(18.0, 32.0);
        let t = track(&frames, start, Matcher::Descriptor(&raw), &scheme).unwrap();
        assert!(t.records[1..].iter().all(|r| r.status == FrameStatus::Unmatched));
        assert!(t.predictions().iter().all(|&p| p == start));
        let truth = vec![start; 3];
        let rep = evaluate(&t, &truth, UnmatchedPolicy::AssignDiagonal, &model(), &cdf()).unwrap();
        assert!(rep.diverged);
        assert_eq!(rep.max_error, t.diagonal());
        let held = evaluate(&t, &truth, UnmatchedPolicy::HoldLast, &model(), &cdf()).unwrap();
        assert!(!held.diverged && held.max_error == 0.0);
    }

    #[test]
    fn search_radius_matches_full_search_for_small_motion() {
        let offsets = vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]];
        let seq = generate(&spec(3, Motion::Explicit { offsets })).unwrap();
        let raw = RawPixelDescriber::default();
        let full = track(&seq.frames, seq.truth[0], Matcher::Descriptor(&raw), &TrackScheme::previous()).unwrap();
        let roi = TrackScheme { search_radius: Some(4), ..TrackScheme::previous() };
        let local = track(&seq.frames, seq.truth[0], Matcher::Descriptor(&raw), &roi).unwrap();
        for (a, b) in full.predictions().iter().zip(local.predictions()) {
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn start_must_admit_window() {
        let seq = generate(&spec(2, Motion::Still)).unwrap();
        let raw = RawPixelDescriber::default();
        let r = track(&seq.frames, Point::new(5.0, 30.0), Matcher::Descriptor(&raw), &TrackScheme::fixed());
        assert!(r.is_err());
        assert!(TrackScheme::fixed().with_ratio_threshold(1.5).validate().is_err());
        assert!(track(&[], Point::new(0.0, 0.0), Matcher::Descriptor(&raw), &TrackScheme::fixed()).is_err());
    }

    #[test]
    fn ci_line_values() {
        let ci = ci_line(130).unwrap();
        assert!((ci[0] - (-2.0 * 0.01f64.ln())).abs() < 1e-3);
        assert!(ci.windows(2).all(|w| w[1] > w[0]));
        let oracle = statrs::distribution::ChiSquared::new(260.0).unwrap();
        use statrs::distribution::ContinuousCDF;
        assert!((oracle.cdf(ci[129]) - 0.99).abs() < 1e-9);
        assert!(ci_line(0).is_err());
    }

    #[test]
    fn report_basics() {
        let m = model();
        let c = cdf();
        let zero: Vec<FrameError> = (1..4).map(|i| FrameError::new(i, 0.0, 0.0)).collect();
        let r = report(&zero, &m, &c, None).unwrap();
        assert_eq!((r.mean_error, r.max_error), (0.0, 0.0));
        assert!(r.rows.iter().all(|row| row.cumulative == 0.0));

        let e = vec![FrameError::new(1, 3.0, 0.0), FrameError::new(2, 0.0, 1.0), FrameError::new(3, 2.0, 0.0)];
        let r = report(&e, &m, &c, Some(516.14)).unwrap();
        assert_eq!(r.sorted_errors, vec![3.0, 2.0, 1.0]);
        assert_eq!((r.mean_error, r.max_error), (2.0, 3.0));
        assert!(!r.diverged);
        let mut running = 0.0;
        for (row, fe) in r.rows.iter().zip(&e) {
            running += fe.dx.powi(2) / m.sigma_x.powi(2) + fe.dy.powi(2) / m.sigma_y.powi(2);
            assert!((row.cumulative - running).abs() < 1e-12);
        }
        assert!(r.weighted_mean_error >= r.mean_error);
        assert!(report(&[], &m, &c, None).is_err());

        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("frame,pred_x,pred_y,err_px,e_std,cumulative,ci\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn model_errors_stay_below_ci_line() {
        let m = model();
        let c = cdf();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (nx, ny) = (Normal::new(0.0, m.sigma_x).unwrap(), Normal::new(0.0, m.sigma_y).unwrap());
        let trials = 1000;
        let below = (0..trials)
            .filter(|_| {
                let e: Vec<FrameError> =
                    (1..=50).map(|i| FrameError::new(i, nx.sample(&mut rng), ny.sample(&mut rng))).collect();
                let r = report(&e, &m, &c, None).unwrap();
                r.rows.last().unwrap().cumulative <= r.rows.last().unwrap().ci
            })
            .count();
        let rate = below as f64 / trials as f64;
        assert!((rate - 0.99).abs() < 0.015, "{rate}");
    }

    #[test]
    fn nn_counting() {
        let grid = position_grid(41, 35, 31, 1).unwrap();
        assert_eq!((grid.cols, grid.rows), (11, 5));
        let truth = Point::new(20.0, 17.0);
        let values: Vec<f64> = grid.centers().map(|c| c.to_point().distance(truth)).collect();
        let land = SsrLandscape::new(grid.clone(), values).unwrap();
        // Centers within 1.5 px of the truth: itself and its 8 neighbors.
        assert_eq!(nn_within_threshold(&land, truth, 1.5).unwrap(), 9);
        assert!(nn_within_threshold(&land, truth, 0.5).unwrap() >= 1);

        let far: Vec<f64> = grid.centers().map(|c| 100.0 - c.to_point().distance(truth)).collect();
        let land = SsrLandscape::new(grid.clone(), far).unwrap();
        assert_eq!(nn_within_threshold(&land, truth, 2.0).unwrap(), 0);

        // Five in-threshold centers planted at ranks 1..5.
        let mut v = vec![100.0; grid.len()];
        let near = [(20, 17), (21, 17), (19, 17), (20, 18), (20, 16)];
        for (rank, &(x, y)) in near.iter().enumerate() {
            v[grid.index(grid.locate(Pixel { x, y }).unwrap())] = rank as f64;
        }
        v[grid.index(grid.locate(Pixel { x: 25, y: 17 }).unwrap())] = 5.0;
        let land = SsrLandscape::new(grid, v).unwrap();
        assert_eq!(nn_within_threshold(&land, truth, 1.0).unwrap(), 5);
    }

    #[test]
    fn diagonal_bounds_mean_error() {
        let t = Track {
            width: 420,
            height: 300,
            records: (0..4)
                .map(|i| FrameRecord {
                    frame: i,
                    prediction: Point::new(50.0, 50.0),
                    status: if i == 0 { FrameStatus::Reference } else { FrameStatus::Unmatched },
                    matched: None,
                    nn_ratio: None,
                })
                .collect(),
        };
        let truth = vec![Point::new(50.0, 50.0); 4];
        let r = evaluate(&t, &truth, UnmatchedPolicy::AssignDiagonal, &model(), &cdf()).unwrap();
        assert!((r.mean_error - 516.14).abs() < 0.005);
        assert!(r.mean_error <= t.diagonal() && r.diverged);
        assert!(r.weighted_mean_error.is_infinite());
    }
}
