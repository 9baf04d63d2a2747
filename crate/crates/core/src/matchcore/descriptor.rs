use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::matchcore::grid::{PositionGrid, SsrLandscape};
use crate::raster::{extract_crop, rgb_to_lab01, ColorSpace, PlanarImage};

/// Fixed-length real feature vector describing one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor(Vec<f64>);

impl Descriptor {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("descriptor must have at least one component"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("descriptor components must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Sum of squared residuals, accumulated in index order.
pub fn ssr(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "descriptor dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(ssr_slices(a.values(), b.values()))
}

#[inline]
pub(crate) fn ssr_slices(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Descriptors for every center of a grid, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    values: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not split into descriptors of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_descriptors(descriptors: &[Descriptor]) -> Result<Self> {
        let dim = descriptors.first().map(Descriptor::dim).unwrap_or(1);
        let mut values = Vec::with_capacity(dim * descriptors.len());
        for d in descriptors {
            if d.dim() != dim {
                return Err(Error::invalid("descriptor set mixes dimensions"));
            }
            values.extend_from_slice(d.values());
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize) -> Descriptor {
        Descriptor(self.row(i).to_vec())
    }
}

/// SSR of `reference` against the descriptor of every grid center.
pub fn ssr_landscape(reference: &Descriptor, grid: &PositionGrid, candidates: &DescriptorSet) -> Result<SsrLandscape> {
    if candidates.len() != grid.len() {
        return Err(Error::invalid(format!(
            "grid has {} centers but {} candidate descriptors were given",
            grid.len(),
            candidates.len()
        )));
    }
    if candidates.dim() != reference.dim() {
        return Err(Error::invalid(format!(
            "descriptor dimensions differ: {} vs {}",
            reference.dim(),
            candidates.dim()
        )));
    }
    let values = (0..candidates.len())
        .map(|i| ssr_slices(reference.values(), candidates.row(i)))
        .collect();
    SsrLandscape::new(*grid, values)
}

/// Anything that can describe a square window at an integer center.
///
/// Implementations are pure: the same image and center always give the same
/// descriptor, and [`DenseDescriber::describe_grid`] must agree exactly with
/// per-center [`DenseDescriber::describe`] calls.
pub trait DenseDescriber: Send + Sync {
    /// Side of the described window (odd).
    fn window(&self) -> usize;

    /// Converts a frame into the space the describer consumes. RGB01 frames
    /// become LAB01 by default.
    fn prepare(&self, frame: &PlanarImage) -> Result<PlanarImage> {
        match frame.space() {
            ColorSpace::Rgb01 => rgb_to_lab01(frame),
            ColorSpace::Lab01 => Ok(frame.clone()),
            other => Err(Error::invalid(format!(
                "describer expects RGB01 or LAB01 frames, got {other:?}"
            ))),
        }
    }

    /// Describes the window centered at `center` of a prepared image.
    fn describe(&self, img: &PlanarImage, center: Pixel) -> Result<Descriptor>;

    /// Describes every center of `grid` on a prepared image.
    fn describe_grid(&self, img: &PlanarImage, grid: &PositionGrid) -> Result<DescriptorSet> {
        let descriptors = grid
            .centers()
            .map(|c| self.describe(img, c))
            .collect::<Result<Vec<_>>>()?;
        DescriptorSet::from_descriptors(&descriptors)
    }
}

/// Raw-pixel baseline: the crop samples themselves, height-width-channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawPixelDescriber {
    pub window: usize,
}

impl Default for RawPixelDescriber {
    fn default() -> Self {
        Self { window: 31 }
    }
}

impl DenseDescriber for RawPixelDescriber {
    fn window(&self) -> usize {
        self.window
    }

    fn describe(&self, img: &PlanarImage, center: Pixel) -> Result<Descriptor> {
        Descriptor::new(extract_crop(img, center, self.window)?.to_hwc())
    }
}
