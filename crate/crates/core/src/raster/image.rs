use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;

/// Meaning of the samples held by a [`PlanarImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    /// Red, green, blue in `[0, 1]`.
    Rgb01,
    /// L* in `[0, 100]`, a* and b* in `[-127, 127]`.
    Cielab,
    /// CIELAB min-max normalized to `[0, 1]` with the fixed channel bounds.
    Lab01,
    /// Single intensity channel in `[0, 1]`.
    Gray01,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray01 => 1,
            _ => 3,
        }
    }

    /// Inclusive bounds of channel `c`.
    pub fn bounds(self, c: usize) -> (f64, f64) {
        match (self, c) {
            (ColorSpace::Cielab, 0) => (0.0, 100.0),
            (ColorSpace::Cielab, _) => (-127.0, 127.0),
            _ => (0.0, 1.0),
        }
    }
}

const RANGE_SLACK: f64 = 1e-9;

/// Multi-channel raster stored as one plane per channel (row-major planes).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    width: usize,
    height: usize,
    space: ColorSpace,
    data: Vec<f64>,
}

impl PlanarImage {
    /// Builds an image from planar samples, validating dimensions and ranges.
    pub fn new(width: usize, height: usize, space: ColorSpace, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        let expected = width * height * space.channels();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "{width}x{height} {space:?} image needs {expected} samples, got {}",
                data.len()
            )));
        }
        let plane = width * height;
        for (i, &v) in data.iter().enumerate() {
            let (lo, hi) = space.bounds(i / plane);
            if !(v >= lo - RANGE_SLACK && v <= hi + RANGE_SLACK) {
                return Err(Error::invalid(format!(
                    "sample {v} of channel {} outside [{lo}, {hi}] for {space:?}",
                    i / plane
                )));
            }
        }
        Ok(Self {
            width,
            height,
            space,
            data,
        })
    }

    pub(crate) fn from_parts(width: usize, height: usize, space: ColorSpace, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * space.channels());
        Self {
            width,
            height,
            space,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, space: ColorSpace, value: f64) -> Result<Self> {
        Self::new(width, height, space, vec![value; width * height * space.channels()])
    }

    /// Evaluates `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        space: ColorSpace,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * space.channels());
        for c in 0..space.channels() {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, space, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.space.channels()
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// All channel values of one pixel.
    pub fn pixel(&self, x: usize, y: usize) -> Vec<f64> {
        (0..self.channels()).map(|c| self.get(x, y, c)).collect()
    }

    /// Bilinear sample of channel `c` at a real position; `None` outside the
    /// pixel-center hull `[0, w-1] x [0, h-1]`.
    pub fn sample_bilinear(&self, c: usize, x: f64, y: f64) -> Option<f64> {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= max_x && y <= max_y) {
            return None;
        }
        Some(bilinear(self.plane(c), self.width, self.height, x, y))
    }

    /// Whether a `size`-wide square window centered at `center` lies inside.
    pub fn window_fits(&self, center: Pixel, size: usize) -> bool {
        let half = size / 2;
        center.x >= half
            && center.y >= half
            && center.x + half < self.width
            && center.y + half < self.height
    }
}

/// Bilinear interpolation on a single plane; callers guarantee `(x, y)` lies
/// in `[0, w-1] x [0, h-1]`.
#[inline]
pub(crate) fn bilinear(plane: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
    let bottom = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Square, odd-sized window cut from a source image.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    center: Pixel,
    image: PlanarImage,
}

impl Crop {
    pub fn center(&self) -> Pixel {
        self.center
    }

    pub fn size(&self) -> usize {
        self.image.width
    }

    pub fn image(&self) -> &PlanarImage {
        &self.image
    }

    pub fn into_image(self) -> PlanarImage {
        self.image
    }

    /// Builds a crop directly from a square odd-sized image (e.g. a decoder
    /// output); `center` records where it came from.
    pub fn from_image(center: Pixel, image: PlanarImage) -> Result<Self> {
        if image.width != image.height || image.width.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "crop must be square and odd-sized, got {}x{}",
                image.width, image.height
            )));
        }
        Ok(Self { center, image })
    }

    /// Samples in height-width-channel order.
    pub fn to_hwc(&self) -> Vec<f64> {
        let img = &self.image;
        let mut out = Vec::with_capacity(img.data.len());
        for y in 0..img.height {
            for x in 0..img.width {
                for c in 0..img.channels() {
                    out.push(img.get(x, y, c));
                }
            }
        }
        out
    }
}

/// Cuts the `size x size` window centered at `center`, all channels.
pub fn extract_crop(img: &PlanarImage, center: Pixel, size: usize) -> Result<Crop> {
    if size.is_multiple_of(2) || size == 0 {
        return Err(Error::invalid(format!("crop size must be odd, got {size}")));
    }
    if !img.window_fits(center, size) {
        return Err(Error::Border {
            x: center.x as i64,
            y: center.y as i64,
            size,
            width: img.width,
            height: img.height,
        });
    }
    let half = size / 2;
    let (x0, y0) = (center.x - half, center.y - half);
    let mut data = Vec::with_capacity(size * size * img.channels());
    for c in 0..img.channels() {
        let plane = img.plane(c);
        for y in y0..y0 + size {
            data.extend_from_slice(&plane[y * img.width + x0..y * img.width + x0 + size]);
        }
    }
    Ok(Crop {
        center,
        image: PlanarImage::from_parts(size, size, img.space, data),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> PlanarImage {
        PlanarImage::from_fn(w, h, ColorSpace::Rgb01, |x, y, c| {
            ((x + 2 * y + c) % 97) as f64 / 96.0
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(PlanarImage::new(0, 3, ColorSpace::Gray01, vec![]).is_err());
        assert!(PlanarImage::new(2, 2, ColorSpace::Gray01, vec![0.0; 3]).is_err());
        assert!(PlanarImage::new(1, 1, ColorSpace::Gray01, vec![1.5]).is_err());
        assert!(PlanarImage::new(1, 1, ColorSpace::Cielab, vec![50.0, -127.0, 127.0]).is_ok());
        assert!(PlanarImage::new(1, 1, ColorSpace::Gray01, vec![f64::NAN]).is_err());
    }

    #[test]
    fn crop_touching_the_border() {
        let img = ramp(100, 100);
        let crop = extract_crop(&img, Pixel::new(15, 15), 31).unwrap();
        assert_eq!(crop.size(), 31);
        assert_eq!(crop.image().get(0, 0, 1), img.get(0, 0, 1));
        assert_eq!(crop.image().get(30, 30, 2), img.get(30, 30, 2));
    }

    #[test]
    fn crop_one_pixel_out_names_the_center() {
        let img = ramp(100, 100);
        match extract_crop(&img, Pixel::new(14, 50), 31) {
            Err(Error::Border { x: 14, y: 50, .. }) => {}
            other => panic!("expected border error, got {other:?}"),
        }
        assert!(extract_crop(&img, Pixel::new(50, 85), 31).is_err());
        assert!(extract_crop(&img, Pixel::new(50, 84), 31).is_ok());
    }

    #[test]
    fn crop_center_sample_is_source_sample() {
        let img = ramp(100, 100);
        let crop = extract_crop(&img, Pixel::new(50, 50), 31).unwrap();
        for c in 0..3 {
            assert_eq!(crop.image().get(15, 15, c), img.get(50, 50, c));
        }
    }

    #[test]
    fn even_crop_size_is_rejected() {
        assert!(extract_crop(&ramp(40, 40), Pixel::new(20, 20), 10).is_err());
    }

    #[test]
    fn bilinear_hits_lattice_and_midpoints() {
        let img = PlanarImage::from_fn(3, 2, ColorSpace::Gray01, |x, y, _| (x + 3 * y) as f64 / 5.0)
            .unwrap();
        assert_eq!(img.sample_bilinear(0, 2.0, 1.0), Some(1.0));
        let mid = img.sample_bilinear(0, 0.5, 0.5).unwrap();
        assert!((mid - 2.0 / 5.0).abs() < 1e-15);
        assert_eq!(img.sample_bilinear(0, 2.01, 0.0), None);
    }
}
