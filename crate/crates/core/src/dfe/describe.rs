use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::io::load_model;
use super::layers::Tensor;
use super::model::CaeModel;
use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::matchcore::{DenseDescriber, Descriptor, DescriptorSet, PositionGrid};
use crate::raster::{extract_crop, PlanarImage};

const STRIP_ROWS: usize = 16;

/// Deep Feature Encodings: the encoder half of a trained autoencoder used
/// as a descriptor. Cheap to clone; the model is shared read-only.
#[derive(Debug, Clone)]
pub struct DfeEncoder {
    model: Arc<CaeModel>,
}

impl DfeEncoder {
    pub fn new(model: CaeModel) -> Self {
        DfeEncoder { model: Arc::new(model) }
    }

    pub fn from_shared(model: Arc<CaeModel>) -> Self {
        DfeEncoder { model }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(load_model(path)?))
    }

    pub fn model(&self) -> &CaeModel {
        &self.model
    }

    /// Latent map of a whole prepared image: one code per valid window
    /// position, computed in horizontal strips. Each position equals the
    /// encoding of its crop bit for bit.
    pub fn encode_dense(&self, img: &PlanarImage) -> Result<Tensor<f32>> {
        let config = self.model.config();
        let (w, h) = (img.width(), img.height());
        if img.channels() != config.channels || w < config.input_size || h < config.input_size {
            return Err(Error::invalid(format!(
                "dense encoding needs a {}-channel image of at least {}x{}, got {}x{}x{}",
                config.channels,
                config.input_size,
                config.input_size,
                w,
                h,
                img.channels()
            )));
        }
        let rf = config.receptive_field();
        let map_h = h + 1 - rf;
        let starts: Vec<usize> = (0..map_h).step_by(STRIP_ROWS).collect();
        let strips = starts
            .par_iter()
            .map(|&r0| {
                let r1 = (r0 + STRIP_ROWS).min(map_h);
                let rows = r1 - r0 + rf - 1;
                let x = hwc_rows(img, r0, rows);
                self.model.encode_tensor(&x)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mw, mc) = (strips[0].w, strips[0].c);
        let mut data = Vec::with_capacity(map_h * mw * mc);
        let mut mh = 0;
        for s in strips {
            mh += s.h;
            data.extend(s.data);
        }
        Ok(Tensor::from_vec(1, mh, mw, mc, data))
    }
}

fn hwc_rows(img: &PlanarImage, y0: usize, rows: usize) -> Tensor<f32> {
    let (w, c) = (img.width(), img.channels());
    let mut t = Tensor::zeros(1, rows, w, c);
    for ch in 0..c {
        let plane = img.plane(ch);
        for y in 0..rows {
            let src = &plane[(y0 + y) * w..(y0 + y + 1) * w];
            for (x, &v) in src.iter().enumerate() {
                t.data[(y * w + x) * c + ch] = v as f32;
            }
        }
    }
    t
}

impl DenseDescriber for DfeEncoder {
    fn window(&self) -> usize {
        self.model.config().input_size
    }

    fn describe(&self, img: &PlanarImage, center: Pixel) -> Result<Descriptor> {
        self.model.encode(&extract_crop(img, center, self.window())?)
    }

    fn describe_grid(&self, img: &PlanarImage, grid: &PositionGrid) -> Result<DescriptorSet> {
        if grid.window != self.window() || grid.image_width != img.width() || grid.image_height != img.height() {
            return Err(Error::invalid("position grid does not belong to this image and encoder"));
        }
        let map = self.encode_dense(img)?;
        let [s, _, c] = self.model.config().latent_shape();
        let dim = s * s * c;
        let mut values = Vec::with_capacity(grid.len() * dim);
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                let (x0, y0) = (col * grid.stride, row * grid.stride);
                for dy in 0..s {
                    let start = ((y0 + dy) * map.w + x0) * c;
                    values.extend(map.data[start..start + s * c].iter().map(|&v| v as f64));
                }
            }
        }
        DescriptorSet::new(dim, values)
    }
}
