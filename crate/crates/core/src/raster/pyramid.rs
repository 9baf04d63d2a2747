use crate::error::{Error, Result};
use crate::geom::Point;
use crate::raster::image::PlanarImage;

/// Deepest pyramid level supported.
pub const MAX_PYRAMID_LEVEL: usize = 4;

/// Reflect-101 index into `0..n` (`-1 -> 1`, `n -> n-2`).
fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// 1-D `[1, 4, 6, 4, 1] / 16` smoothing written as four cascaded pair
/// averages over a reflect-101 padded line. Each pair average maps a constant
/// onto itself exactly.
fn binomial_line(line: &[f64], buf: &mut Vec<f64>) {
    let n = line.len();
    buf.clear();
    buf.extend((-2..n as isize + 2).map(|i| line[reflect101(i, n)]));
    for _ in 0..4 {
        for i in 0..buf.len() - 1 {
            buf[i] = (buf[i] + buf[i + 1]) * 0.5;
        }
        buf.pop();
    }
}

fn prefilter_plane(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(width.max(height) + 4);
    let mut rows = vec![0.0; width * height];
    for y in 0..height {
        binomial_line(&plane[y * width..(y + 1) * width], &mut buf);
        rows[y * width..(y + 1) * width].copy_from_slice(&buf);
    }
    let mut out = vec![0.0; width * height];
    let mut column = vec![0.0; height];
    for x in 0..width {
        for y in 0..height {
            column[y] = rows[y * width + x];
        }
        binomial_line(&column, &mut buf);
        for y in 0..height {
            out[y * width + x] = buf[y];
        }
    }
    out
}

/// Halves both dimensions (floor): binomial prefilter, then 2x2 block mean.
pub fn downsample_half(img: &PlanarImage) -> Result<PlanarImage> {
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!(
            "downsample_half needs at least 2x2, got {w}x{h}"
        )));
    }
    let (ow, oh) = (w / 2, h / 2);
    let mut data = Vec::with_capacity(ow * oh * img.channels());
    for c in 0..img.channels() {
        let smooth = prefilter_plane(img.plane(c), w, h);
        for y in 0..oh {
            let r0 = &smooth[2 * y * w..];
            let r1 = &smooth[(2 * y + 1) * w..];
            for x in 0..ow {
                let top = r0[2 * x] + r0[2 * x + 1];
                let bottom = r1[2 * x] + r1[2 * x + 1];
                data.push((top + bottom) * 0.25);
            }
        }
    }
    Ok(PlanarImage::from_parts(ow, oh, img.space(), data))
}

/// Resolution pyramid `I^0 .. I^{L_m}`; level 0 is the input.
#[derive(Debug, Clone)]
pub struct ImagePyramid {
    levels: Vec<PlanarImage>,
}

impl ImagePyramid {
    pub fn levels(&self) -> &[PlanarImage] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &PlanarImage {
        &self.levels[l]
    }

    /// `L_m`, the index of the coarsest level.
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Builds `max_level + 1` levels. Every level must keep both sides at least
/// `min_side` pixels (pass the flow window plus its gradient margin).
pub fn build_pyramid(img: &PlanarImage, max_level: usize, min_side: usize) -> Result<ImagePyramid> {
    if max_level > MAX_PYRAMID_LEVEL {
        return Err(Error::invalid(format!(
            "pyramid depth {max_level} exceeds the maximum of {MAX_PYRAMID_LEVEL}"
        )));
    }
    let check = |level: &PlanarImage, l: usize| {
        if level.width() < min_side || level.height() < min_side {
            Err(Error::invalid(format!(
                "pyramid level {l} is {}x{}, smaller than the required {min_side} pixels per side",
                level.width(),
                level.height()
            )))
        } else {
            Ok(())
        }
    };
    check(img, 0)?;
    let mut levels = vec![img.clone()];
    for l in 1..=max_level {
        let next = downsample_half(&levels[l - 1])?;
        check(&next, l)?;
        levels.push(next);
    }
    Ok(ImagePyramid { levels })
}

/// Position of `p` on pyramid level `level`: `p / 2^level`, unrounded.
pub fn pyramid_coords(p: Point, level: usize) -> Point {
    let scale = (0.5f64).powi(level as i32);
    Point::new(p.x * scale, p.y * scale)
}

/// Bilinear resize on pixel centers (`src = (dst + 0.5) * in/out - 0.5`,
/// clamped to the source hull).
pub fn resize_bilinear(img: &PlanarImage, width: usize, height: usize) -> Result<PlanarImage> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let sx = img.width() as f64 / width as f64;
    let sy = img.height() as f64 / height as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let mut data = Vec::with_capacity(width * height * img.channels());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
                data.push(crate::raster::image::bilinear(
                    plane,
                    img.width(),
                    img.height(),
                    fx,
                    fy,
                ));
            }
        }
    }
    Ok(PlanarImage::from_parts(width, height, img.space(), data))
}
