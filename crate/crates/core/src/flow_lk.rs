//! Pyramidal Lucas-Kanade sparse optical flow for single points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::raster::{build_pyramid, pyramid_coords, ColorSpace, ImagePyramid, PlanarImage};

/// Window and termination parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowWindow {
    /// Pixels per side of the integration window.
    pub size: usize,
    /// Index of the coarsest pyramid level (`L_m`).
    pub max_level: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the per-iteration increment, in pixels.
    pub epsilon: f64,
}

impl Default for FlowWindow {
    fn default() -> Self {
        Self {
            size: 10,
            max_level: 4,
            max_iterations: 10,
            epsilon: 0.03,
        }
    }
}

impl FlowWindow {
    pub fn validate(&self) -> Result<()> {
        if self.size < 3 {
            return Err(Error::invalid(format!("flow window must be at least 3, got {}", self.size)));
        }
        if self.max_level > crate::raster::MAX_PYRAMID_LEVEL {
            return Err(Error::invalid(format!("max_level {} exceeds 4", self.max_level)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Smallest pyramid side that still holds the window and its gradient margin.
    pub fn min_level_side(&self) -> usize {
        self.size + 2
    }

    /// Copy with `max_level` lowered until every level of a `width`×`height`
    /// pyramid keeps [`min_level_side`](Self::min_level_side) pixels.
    pub fn fitted_to(&self, width: usize, height: usize) -> FlowWindow {
        let mut out = *self;
        let side = |l: usize| (width >> l).min(height >> l);
        while out.max_level > 0 && side(out.max_level) < self.min_level_side() {
            out.max_level -= 1;
        }
        out
    }

    /// Offsets of the window samples from its center, row-major.
    fn offsets(&self) -> impl Iterator<Item = Point> + '_ {
        let half = (self.size as f64 - 1.0) * 0.5;
        (0..self.size).flat_map(move |j| {
            (0..self.size).map(move |i| Point::new(i as f64 - half, j as f64 - half))
        })
    }
}

/// Windowed sums of gradient outer products.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StructureTensor {
    pub sum_ixix: f64,
    pub sum_ixiy: f64,
    pub sum_iyiy: f64,
}

impl StructureTensor {
    pub fn from_gradients(ix: &[f64], iy: &[f64]) -> Self {
        let mut t = Self::default();
        for (&gx, &gy) in ix.iter().zip(iy) {
            t.sum_ixix += gx * gx;
            t.sum_ixiy += gx * gy;
            t.sum_iyiy += gy * gy;
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.sum_ixix + self.sum_iyiy
    }

    pub fn determinant(&self) -> f64 {
        self.sum_ixix * self.sum_iyiy - self.sum_ixiy * self.sum_ixiy
    }

    /// Eigenvalues `(λ1, λ2)` with `λ1 ≥ λ2`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let diff = 0.5 * (self.sum_ixix - self.sum_iyiy);
        let radius = diff.hypot(self.sum_ixiy);
        (mean + radius, mean - radius)
    }

    /// Scale-aware singularity test: `det < 1e-12 * trace²`.
    pub fn is_singular(&self) -> bool {
        let tr = self.trace();
        tr <= 0.0 || self.determinant() < 1e-12 * tr * tr
    }
}

/// `λ1 / λ2`, or `+∞` when `λ2 ≤ 1e-15`.
pub fn eigen_ratio(t: &StructureTensor) -> f64 {
    let (l1, l2) = t.eigenvalues();
    if l2 <= 1e-15 {
        f64::INFINITY
    } else {
        l1 / l2
    }
}

/// Central-difference gradients sampled on a square window.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientWindow {
    pub ix: Vec<f64>,
    pub iy: Vec<f64>,
    /// Intensities at the window samples.
    pub values: Vec<f64>,
}

fn sample(img: &PlanarImage, x: f64, y: f64) -> Option<f64> {
    img.sample_bilinear(0, x, y)
}

/// `Ix = (I(x+1,y) - I(x-1,y)) / 2`, `Iy` likewise, with bilinear sampling at
/// non-integer positions. `None` when any stencil sample leaves the image.
pub fn spatial_gradients(img: &PlanarImage, center: Point, win: &FlowWindow) -> Option<GradientWindow> {
    let n = win.size * win.size;
    let mut out = GradientWindow {
        ix: Vec::with_capacity(n),
        iy: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
    };
    for off in win.offsets() {
        let q = center + off;
        let right = sample(img, q.x + 1.0, q.y)?;
        let left = sample(img, q.x - 1.0, q.y)?;
        let down = sample(img, q.x, q.y + 1.0)?;
        let up = sample(img, q.x, q.y - 1.0)?;
        out.ix.push((right - left) * 0.5);
        out.iy.push((down - up) * 0.5);
        out.values.push(sample(img, q.x, q.y)?);
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Converged,
    MaxIterations,
    Singular,
    OutOfBounds,
}

impl FlowStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, FlowStatus::Singular | FlowStatus::OutOfBounds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    /// Matched position in the current image.
    pub position: Point,
    /// `position - p`.
    pub displacement: Point,
    pub status: FlowStatus,
    pub eigen_ratio: f64,
    /// Increment magnitude of every iteration at the finest level visited.
    pub increments: Vec<f64>,
    /// Estimate at each visited level, coarsest first, in that level's coordinates.
    pub level_estimates: Vec<Point>,
}

/// Iterative Lucas-Kanade on one resolution level, starting at `guess`.
pub fn lk_step(ref_img: &PlanarImage, cur: &PlanarImage, p: Point, guess: Point, win: &FlowWindow) -> FlowResult {
    let fail = |status, ratio| FlowResult {
        position: guess,
        displacement: guess - p,
        status,
        eigen_ratio: ratio,
        increments: vec![],
        level_estimates: vec![guess],
    };
    let Some(grad) = spatial_gradients(ref_img, p, win) else {
        return fail(FlowStatus::OutOfBounds, f64::NAN);
    };
    let tensor = StructureTensor::from_gradients(&grad.ix, &grad.iy);
    let ratio = eigen_ratio(&tensor);
    if tensor.is_singular() {
        return fail(FlowStatus::Singular, ratio);
    }
    let det = tensor.determinant();
    let offsets: Vec<Point> = win.offsets().collect();

    let mut estimate = guess;
    let mut increments = Vec::with_capacity(win.max_iterations);
    let mut status = FlowStatus::MaxIterations;
    for _ in 0..win.max_iterations {
        let (mut bx, mut by) = (0.0, 0.0);
        for (k, off) in offsets.iter().enumerate() {
            let q = estimate + *off;
            let Some(j) = sample(cur, q.x, q.y) else {
                return FlowResult {
                    position: estimate,
                    displacement: estimate - p,
                    status: FlowStatus::OutOfBounds,
                    eigen_ratio: ratio,
                    increments,
                    level_estimates: vec![estimate],
                };
            };
            let it = j - grad.values[k];
            bx += grad.ix[k] * it;
            by += grad.iy[k] * it;
        }
        // Solve G * step = -b.
        let step = Point::new(
            -(tensor.sum_iyiy * bx - tensor.sum_ixiy * by) / det,
            -(tensor.sum_ixix * by - tensor.sum_ixiy * bx) / det,
        );
        estimate = estimate + step;
        let magnitude = step.norm();
        increments.push(magnitude);
        if magnitude < win.epsilon {
            status = FlowStatus::Converged;
            break;
        }
    }
    FlowResult {
        position: estimate,
        displacement: estimate - p,
        status,
        eigen_ratio: ratio,
        increments,
        level_estimates: vec![estimate],
    }
}

/// Grayscale pyramid suitable for [`lk_pyramidal_on`].
pub fn flow_pyramid(img: &PlanarImage, win: &FlowWindow) -> Result<ImagePyramid> {
    win.validate()?;
    if img.space() != ColorSpace::Gray01 {
        return Err(Error::invalid(format!(
            "optical flow expects GRAY01 images, got {:?}",
            img.space()
        )));
    }
    build_pyramid(img, win.max_level, win.min_level_side())
}

/// Coarse-to-fine tracking of `p` from `ref_img` to `cur`, starting at `p`.
pub fn lk_pyramidal(ref_img: &PlanarImage, cur: &PlanarImage, p: Point, win: &FlowWindow) -> Result<FlowResult> {
    let ref_pyr = flow_pyramid(ref_img, win)?;
    let cur_pyr = flow_pyramid(cur, win)?;
    Ok(lk_pyramidal_on(&ref_pyr, &cur_pyr, p, p, win))
}

/// Pyramidal tracking on prebuilt pyramids with an explicit level-0 guess.
pub fn lk_pyramidal_on(
    ref_pyr: &ImagePyramid,
    cur_pyr: &ImagePyramid,
    p: Point,
    guess: Point,
    win: &FlowWindow,
) -> FlowResult {
    let top = win.max_level.min(ref_pyr.max_level()).min(cur_pyr.max_level());
    let mut estimate = pyramid_coords(guess, top);
    let mut level_estimates = Vec::with_capacity(top + 1);
    let mut last: Option<FlowResult> = None;
    for level in (0..=top).rev() {
        let p_level = pyramid_coords(p, level);
        let mut res = lk_step(ref_pyr.level(level), cur_pyr.level(level), p_level, estimate, win);
        if level > 0 && res.status == FlowStatus::OutOfBounds {
            // Window does not fit at this level; refine on the finer ones.
            level_estimates.push(estimate);
            estimate = estimate * 2.0;
            continue;
        }
        level_estimates.push(res.position);
        if res.status.is_failure() {
            // Report the last good estimate in level-0 coordinates.
            let scale = (1u64 << level) as f64;
            let position = res.position * scale;
            res.position = position;
            res.displacement = position - p;
            res.level_estimates = level_estimates;
            return res;
        }
        if level > 0 {
            estimate = res.position * 2.0;
        }
        last = Some(res);
    }
    let mut res = last.expect("at least one level");
    res.level_estimates = level_estimates;
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> PlanarImage {
        PlanarImage::from_fn(w, h, ColorSpace::Gray01, |x, y, _| f(x as f64, y as f64)).unwrap()
    }

    fn smooth_texture(w: usize, h: usize, shift: Point) -> PlanarImage {
        gray(w, h, |x, y| {
            let (x, y) = (x - shift.x, y - shift.y);
            0.5 + 0.2 * (x * 0.21).sin() * (y * 0.17).cos() + 0.15 * (x * 0.07 + y * 0.11).sin()
        })
    }

    #[test]
    fn window_validation() {
        assert!(FlowWindow::default().validate().is_ok());
        assert!(FlowWindow { size: 2, ..Default::default() }.validate().is_err());
        assert!(FlowWindow { max_level: 5, ..Default::default() }.validate().is_err());
        assert!(FlowWindow { epsilon: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn gradients_of_simple_fields() {
        let win = FlowWindow { size: 3, ..Default::default() };
        let ramp = gray(20, 20, |x, _| x / 20.0);
        let g = spatial_gradients(&ramp, Point::new(10.0, 10.0), &win).unwrap();
        assert!(g.ix.iter().all(|v| (v - 0.05).abs() < 1e-12));
        assert!(g.iy.iter().all(|v| v.abs() < 1e-12));

        let flat = gray(20, 20, |_, _| 0.4);
        let g = spatial_gradients(&flat, Point::new(7.5, 9.25), &win).unwrap();
        assert!(g.ix.iter().chain(&g.iy).all(|v| *v == 0.0));

        // I = x*y/100: analytic partials at (3, 3) are 0.03 each.
        let product = gray(10, 10, |x, y| x * y / 100.0);
        let single = FlowWindow { size: 3, ..Default::default() };
        let g = spatial_gradients(&product, Point::new(3.0, 3.0), &single).unwrap();
        assert!((g.ix[4] - 0.03).abs() < 1e-12);
        assert!((g.iy[4] - 0.03).abs() < 1e-12);

        assert!(spatial_gradients(&ramp, Point::new(1.0, 10.0), &win).is_none());
    }

    #[test]
    fn eigen_ratio_cases() {
        let identity = StructureTensor { sum_ixix: 1.0, sum_ixiy: 0.0, sum_iyiy: 1.0 };
        assert_eq!(eigen_ratio(&identity), 1.0);
        let diag = StructureTensor { sum_ixix: 4.0, sum_ixiy: 0.0, sum_iyiy: 1.0 };
        assert_eq!(eigen_ratio(&diag), 4.0);
        let edge = gray(30, 30, |x, _| if x < 15.0 { 0.2 } else { 0.8 });
        let g = spatial_gradients(&edge, Point::new(15.0, 15.0), &FlowWindow::default()).unwrap();
        let t = StructureTensor::from_gradients(&g.ix, &g.iy);
        assert_eq!(eigen_ratio(&t), f64::INFINITY);
        assert!(t.is_singular());
    }

    #[test]
    fn zero_motion_converges_immediately() {
        let img = smooth_texture(64, 64, Point::default());
        let p = Point::new(32.0, 30.0);
        let r = lk_step(&img, &img, p, p, &FlowWindow::default());
        assert_eq!(r.status, FlowStatus::Converged);
        assert_eq!(r.increments.len(), 1);
        assert_eq!(r.displacement, Point::default());
    }

    #[test]
    fn half_pixel_shift_single_level() {
        let a = smooth_texture(64, 64, Point::default());
        let b = smooth_texture(64, 64, Point::new(0.5, 0.0));
        let p = Point::new(32.0, 32.0);
        let win = FlowWindow { max_level: 0, ..Default::default() };
        let r = lk_step(&a, &b, p, p, &win);
        assert_eq!(r.status, FlowStatus::Converged);
        assert!((r.displacement - Point::new(0.5, 0.0)).norm() < 0.05, "{:?}", r.displacement);
        assert!(*r.increments.last().unwrap() < win.epsilon);
    }

    #[test]
    fn constant_region_is_singular() {
        let flat = gray(64, 64, |_, _| 0.5);
        let p = Point::new(32.0, 32.0);
        let r = lk_step(&flat, &flat, p, p, &FlowWindow::default());
        assert_eq!(r.status, FlowStatus::Singular);
        let flat = gray(256, 256, |_, _| 0.5);
        let r = lk_pyramidal(&flat, &flat, Point::new(128.0, 128.0), &FlowWindow::default()).unwrap();
        assert_eq!(r.status, FlowStatus::Singular);
    }

    #[test]
    fn leaving_the_image_is_out_of_bounds() {
        let img = smooth_texture(64, 64, Point::default());
        let r = lk_step(&img, &img, Point::new(3.0, 30.0), Point::new(3.0, 30.0), &FlowWindow::default());
        assert_eq!(r.status, FlowStatus::OutOfBounds);
    }

    #[test]
    fn pyramidal_zero_motion_tracks_level_coordinates() {
        let img = smooth_texture(256, 256, Point::default());
        let p = Point::new(128.0, 120.0);
        let r = lk_pyramidal(&img, &img, p, &FlowWindow::default()).unwrap();
        assert_eq!(r.displacement, Point::default());
        assert_eq!(r.level_estimates.len(), 5);
        for (i, est) in r.level_estimates.iter().enumerate() {
            let level = 4 - i;
            assert!((*est - pyramid_coords(p, level)).norm() < 1e-9);
        }
    }

    #[test]
    fn pyramid_too_small_is_an_error() {
        let img = smooth_texture(40, 40, Point::default());
        assert!(lk_pyramidal(&img, &img, Point::new(20.0, 20.0), &FlowWindow::default()).is_err());
        let rgb = PlanarImage::filled(64, 64, ColorSpace::Rgb01, 0.5).unwrap();
        assert!(flow_pyramid(&rgb, &FlowWindow::default()).is_err());
    }
}
