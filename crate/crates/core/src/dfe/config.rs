use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One valid-convolution block: `filters` output channels, `kernel`×`kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub filters: usize,
    pub kernel: usize,
}

impl BlockSpec {
    pub const fn new(filters: usize, kernel: usize) -> Self {
        BlockSpec { filters, kernel }
    }
}

/// Architecture of the convolutional autoencoder.
///
/// Every encoder block is a valid convolution followed by batch
/// normalization and a rectifier. The decoder mirrors the encoder with
/// transposed convolutions; its last layer has `channels` filters and a
/// sigmoid instead of batch normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaeConfig {
    pub input_size: usize,
    pub channels: usize,
    pub encoder: Vec<BlockSpec>,
    pub seed: u64,
}

impl Default for CaeConfig {
    /// 31×31×3 → 23 → 15 → 7 → 1×1×128.
    fn default() -> Self {
        CaeConfig {
            input_size: 31,
            channels: 3,
            encoder: vec![
                BlockSpec::new(4, 9),
                BlockSpec::new(8, 9),
                BlockSpec::new(16, 9),
                BlockSpec::new(128, 7),
            ],
            seed: 0,
        }
    }
}

/// Symbolic shape of one trainable or buffered tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorShape {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One decoder layer derived from the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub batch_norm: bool,
}

impl CaeConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.channels == 0 {
            return Err(Error::invalid("autoencoder input size and channels must be positive"));
        }
        if self.encoder.is_empty() {
            return Err(Error::invalid("autoencoder needs at least one encoder block"));
        }
        let mut side = self.input_size;
        for (i, b) in self.encoder.iter().enumerate() {
            if b.filters == 0 {
                return Err(Error::invalid(format!("encoder block {i} has zero filters")));
            }
            if b.kernel == 0 || b.kernel % 2 == 0 {
                return Err(Error::invalid(format!("encoder block {i} kernel {} is not odd", b.kernel)));
            }
            if b.kernel > side {
                return Err(Error::invalid(format!(
                    "encoder block {i} kernel {} exceeds its {side}x{side} input",
                    b.kernel
                )));
            }
            side -= b.kernel - 1;
        }
        Ok(())
    }

    /// Spatial side after each encoder block, starting with the input.
    pub fn spatial_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_size];
        for b in &self.encoder {
            let last = *sizes.last().unwrap();
            sizes.push(last + 1 - b.kernel);
        }
        sizes
    }

    /// Spatial shrink of the whole encoder; a window of `input_size` maps to
    /// one latent position.
    pub fn receptive_field(&self) -> usize {
        1 + self.encoder.iter().map(|b| b.kernel - 1).sum::<usize>()
    }

    /// `(side, side, filters)` of the latent code.
    pub fn latent_shape(&self) -> [usize; 3] {
        let side = *self.spatial_sizes().last().unwrap();
        [side, side, self.encoder.last().unwrap().filters]
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_shape().iter().product()
    }

    pub fn input_dim(&self) -> usize {
        self.input_size * self.input_size * self.channels
    }

    /// Latent over input dimensionality.
    pub fn compression_factor(&self) -> f64 {
        self.latent_dim() as f64 / self.input_dim() as f64
    }

    pub fn decoder_layers(&self) -> Vec<DecoderLayer> {
        let nb = self.encoder.len();
        (0..nb)
            .map(|j| {
                let src = self.encoder[nb - 1 - j];
                let last = j == nb - 1;
                DecoderLayer {
                    in_channels: src.filters,
                    out_channels: if last { self.channels } else { self.encoder[nb - 2 - j].filters },
                    kernel: src.kernel,
                    batch_norm: !last,
                }
            })
            .collect()
    }

    /// Activation shapes `(h, w, c)` in forward order: input, every encoder
    /// block output, every decoder layer output.
    pub fn activation_shapes(&self) -> Vec<[usize; 3]> {
        let sizes = self.spatial_sizes();
        let mut shapes = vec![[self.input_size, self.input_size, self.channels]];
        for (b, &s) in self.encoder.iter().zip(&sizes[1..]) {
            shapes.push([s, s, b.filters]);
        }
        let mut side = *sizes.last().unwrap();
        for d in self.decoder_layers() {
            side += d.kernel - 1;
            shapes.push([side, side, d.out_channels]);
        }
        shapes
    }

    /// Every stored tensor in file order: per layer weight, bias, then for
    /// batch-normalized layers gamma, beta, running mean, running variance.
    pub fn tensor_shapes(&self) -> Vec<TensorShape> {
        let mut out = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| out.push(TensorShape { name, shape });
        let mut cin = self.channels;
        for (i, b) in self.encoder.iter().enumerate() {
            push(format!("encoder.{i}.weight"), vec![b.kernel, b.kernel, cin, b.filters]);
            push(format!("encoder.{i}.bias"), vec![b.filters]);
            for t in ["gamma", "beta", "running_mean", "running_var"] {
                push(format!("encoder.{i}.bn.{t}"), vec![b.filters]);
            }
            cin = b.filters;
        }
        for (j, d) in self.decoder_layers().iter().enumerate() {
            push(format!("decoder.{j}.weight"), vec![d.kernel, d.kernel, d.in_channels, d.out_channels]);
            push(format!("decoder.{j}.bias"), vec![d.out_channels]);
            if d.batch_norm {
                for t in ["gamma", "beta", "running_mean", "running_var"] {
                    push(format!("decoder.{j}.bn.{t}"), vec![d.out_channels]);
                }
            }
        }
        out
    }

    /// Trainable parameter count (running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .filter(|t| !t.name.contains("running_"))
            .map(TensorShape::len)
            .sum()
    }
}
