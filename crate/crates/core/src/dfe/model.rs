use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::CaeConfig;
use super::layers::{
    conv_backward, conv_forward, relu_inplace, sigmoid, tconv_backward, tconv_forward, BatchNorm, BnCache,
    ConvWeights, Real, Tensor,
};
use crate::error::{Error, Result};
use crate::matchcore::Descriptor;
use crate::raster::{ColorSpace, Crop, PlanarImage};

/// One convolution with its optional batch normalization. Layers with
/// batch normalization use a rectifier, the others a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub conv: ConvWeights<T>,
    pub bn: Option<BatchNorm<T>>,
    pub transposed: bool,
}

/// Convolutional autoencoder with parameters of type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cae<T> {
    config: CaeConfig,
    layers: Vec<Layer<T>>,
    frozen: Vec<bool>,
}

/// Production model precision.
pub type CaeModel = Cae<f32>;

/// Gradients in the order of [`Cae::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Cae<T>) -> Self {
        Gradients {
            tensors: model.params().iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }
}

/// Output of a training-mode forward and backward pass.
#[derive(Debug, Clone)]
pub struct TrainStep<T> {
    pub loss: f64,
    pub gradients: Gradients<T>,
    bn_caches: Vec<Option<BnCache<T>>>,
}

struct LayerCache<T> {
    input: Tensor<T>,
    bn: Option<BnCache<T>>,
    output: Tensor<T>,
}

impl<T: Real> Cae<T> {
    /// Fan-in scaled uniform initialization `U(±√(6/fan_in))` drawn from the
    /// config seed; biases zero, batch normalization identity.
    pub fn new(config: CaeConfig) -> Result<Self> {
        config.validate()?;
        let mut model = Self::zeroed(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        for layer in &mut model.layers {
            let fan_in = (layer.conv.kernel * layer.conv.kernel * layer.conv.cin) as f64;
            let bound = (6.0 / fan_in).sqrt();
            for w in layer.conv.weight.iter_mut() {
                *w = T::lit(rng.gen_range(-bound..bound));
            }
        }
        Ok(model)
    }

    /// All weights and biases zero, batch normalization identity.
    pub fn zeroed(config: CaeConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::new();
        let mut cin = config.channels;
        for b in &config.encoder {
            layers.push(Layer {
                conv: ConvWeights::zeros(b.kernel, cin, b.filters),
                bn: Some(BatchNorm::identity(b.filters)),
                transposed: false,
            });
            cin = b.filters;
        }
        for d in config.decoder_layers() {
            layers.push(Layer {
                conv: ConvWeights::zeros(d.kernel, d.in_channels, d.out_channels),
                bn: d.batch_norm.then(|| BatchNorm::identity(d.out_channels)),
                transposed: true,
            });
        }
        let frozen = vec![false; layers.len()];
        Ok(Cae { config, layers, frozen })
    }

    pub fn config(&self) -> &CaeConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    fn encoder_len(&self) -> usize {
        self.config.encoder.len()
    }

    /// `encoder.i` or `decoder.j`.
    pub fn layer_name(&self, index: usize) -> String {
        let ne = self.encoder_len();
        if index < ne {
            format!("encoder.{index}")
        } else {
            format!("decoder.{}", index - ne)
        }
    }

    fn layer_index(&self, name: &str) -> Result<usize> {
        (0..self.layers.len())
            .find(|&i| self.layer_name(i) == name)
            .ok_or_else(|| Error::invalid(format!("no layer named `{name}`")))
    }

    /// Frozen layers receive exactly zero gradients.
    pub fn set_frozen(&mut self, layer: &str, frozen: bool) -> Result<()> {
        let i = self.layer_index(layer)?;
        self.frozen[i] = frozen;
        Ok(())
    }

    /// Every stored tensor in the order of [`CaeConfig::tensor_shapes`].
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            out.push(&l.conv.weight);
            out.push(&l.conv.bias);
            if let Some(bn) = &l.bn {
                out.extend([&bn.gamma[..], &bn.beta, &bn.running_mean, &bn.running_var]);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.conv.weight);
            out.push(&mut l.conv.bias);
            if let Some(bn) = &mut l.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
                out.push(&mut bn.running_mean);
                out.push(&mut bn.running_var);
            }
        }
        out
    }

    /// Trainable tensors: per layer weight, bias, then gamma and beta.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for l in &self.layers {
            out.push(&l.conv.weight);
            out.push(&l.conv.bias);
            if let Some(bn) = &l.bn {
                out.push(&bn.gamma);
                out.push(&bn.beta);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.conv.weight);
            out.push(&mut l.conv.bias);
            if let Some(bn) = &mut l.bn {
                out.push(&mut bn.gamma);
                out.push(&mut bn.beta);
            }
        }
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.config
            .tensor_shapes()
            .into_iter()
            .filter(|t| !t.name.contains("running_"))
            .map(|t| t.name)
            .collect()
    }

    /// Same model in another precision.
    pub fn cast<U: Real>(&self) -> Cae<U> {
        let conv = |v: &[T]| -> Vec<U> { v.iter().map(|x| U::lit(x.to_f64().unwrap())).collect() };
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                conv: ConvWeights {
                    kernel: l.conv.kernel,
                    cin: l.conv.cin,
                    cout: l.conv.cout,
                    weight: conv(&l.conv.weight),
                    bias: conv(&l.conv.bias),
                },
                bn: l.bn.as_ref().map(|bn| BatchNorm {
                    gamma: conv(&bn.gamma),
                    beta: conv(&bn.beta),
                    running_mean: conv(&bn.running_mean),
                    running_var: conv(&bn.running_var),
                }),
                transposed: l.transposed,
            })
            .collect();
        Cae { config: self.config.clone(), layers, frozen: self.frozen.clone() }
    }

    fn check_input(&self, x: &Tensor<T>, exact: bool) -> Result<()> {
        let s = self.config.input_size;
        let rf = self.config.receptive_field();
        let ok = x.c == self.config.channels
            && if exact { x.h == s && x.w == s } else { x.h >= rf && x.w >= rf };
        if !ok || x.n == 0 {
            return Err(Error::invalid(format!(
                "autoencoder input is {}x{}x{}x{}, expected n x {s} x {s} x {}",
                x.n, x.h, x.w, x.c, self.config.channels
            )));
        }
        Ok(())
    }

    fn run_layer_infer(&self, layer: &Layer<T>, x: &Tensor<T>) -> Tensor<T> {
        let mut z = if layer.transposed { tconv_forward(x, &layer.conv) } else { conv_forward(x, &layer.conv) };
        if let Some(bn) = &layer.bn {
            bn.forward_infer(&mut z);
            relu_inplace(&mut z);
        }
        z
    }

    /// Inference-mode encoder. Inputs larger than the crop size give a
    /// dense map of latent positions.
    pub fn encode_tensor(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, false)?;
        let mut a = self.run_layer_infer(&self.layers[0], x);
        for layer in &self.layers[1..self.encoder_len()] {
            a = self.run_layer_infer(layer, &a);
        }
        Ok(a)
    }

    /// Inference-mode decoder returning sigmoid pre-activations.
    pub fn decode_logits(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        let [s, _, c] = self.config.latent_shape();
        if z.h != s || z.w != s || z.c != c || z.n == 0 {
            return Err(Error::invalid(format!(
                "latent batch is {}x{}x{}, expected {s}x{s}x{c}",
                z.h, z.w, z.c
            )));
        }
        let mut a = z.clone();
        for layer in &self.layers[self.encoder_len()..] {
            a = self.run_layer_infer(layer, &a);
        }
        Ok(a)
    }

    /// Inference-mode reconstruction with samples in (0, 1).
    pub fn reconstruct(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, true)?;
        let mut a = self.decode_logits(&self.encode_tensor(x)?)?;
        a.data.iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(a)
    }

    /// Inference-mode mean squared reconstruction error.
    pub fn reconstruction_loss(&self, batch: &Tensor<T>) -> Result<f64> {
        let out = self.reconstruct(batch)?;
        Ok(mse(&out.data, &batch.data))
    }

    /// 128-d descriptor of a LAB01 crop.
    pub fn encode(&self, crop: &Crop) -> Result<Descriptor> {
        let x = self.crop_tensor(crop)?;
        let z = self.encode_tensor(&x)?;
        Descriptor::new(z.data.iter().map(|v| v.to_f64().unwrap()).collect())
    }

    /// Decodes a latent vector into a LAB01 crop centered at the origin.
    pub fn decode(&self, d: &Descriptor) -> Result<Crop> {
        let [s, _, c] = self.config.latent_shape();
        if d.dim() != s * s * c {
            return Err(Error::invalid(format!("descriptor has {} values, expected {}", d.dim(), s * s * c)));
        }
        let z = Tensor::from_vec(1, s, s, c, d.values().iter().map(|&v| T::lit(v)).collect());
        let logits = self.decode_logits(&z)?;
        let n = self.config.input_size;
        let ch = self.config.channels;
        let img = planar_from_hwc(n, ch, &logits.data, |v| 1.0 / (1.0 + (-v.to_f64().unwrap()).exp()))?;
        Crop::from_image(crate::geom::Pixel { x: 0, y: 0 }, img)
    }

    pub(crate) fn crop_tensor(&self, crop: &Crop) -> Result<Tensor<T>> {
        let img = crop.image();
        if img.space() != ColorSpace::Lab01 && !(self.config.channels == 1 && img.space() == ColorSpace::Gray01) {
            return Err(Error::invalid(format!("autoencoder expects LAB01 crops, got {:?}", img.space())));
        }
        let s = self.config.input_size;
        if crop.size() != s || img.channels() != self.config.channels {
            return Err(Error::invalid(format!(
                "crop is {}x{}x{}, expected {s}x{s}x{}",
                crop.size(),
                crop.size(),
                img.channels(),
                self.config.channels
            )));
        }
        Ok(Tensor::from_vec(1, s, s, img.channels(), crop.to_hwc().into_iter().map(T::lit).collect()))
    }

    fn forward_cached(&self, batch: &Tensor<T>) -> Vec<LayerCache<T>> {
        let mut caches: Vec<LayerCache<T>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = caches.last().map_or_else(|| batch.clone(), |c| c.output.clone());
            let z = if layer.transposed { tconv_forward(&input, &layer.conv) } else { conv_forward(&input, &layer.conv) };
            let (output, bn) = match &layer.bn {
                Some(bn) => {
                    let (mut y, cache) = bn.forward_train(&z);
                    relu_inplace(&mut y);
                    (y, Some(cache))
                }
                None => {
                    let mut y = z;
                    y.data.iter_mut().for_each(|v| *v = sigmoid(*v));
                    (y, None)
                }
            };
            caches.push(LayerCache { input, bn, output });
        }
        caches
    }

    fn check_train_batch(&self, batch: &Tensor<T>) -> Result<()> {
        self.check_input(batch, true)?;
        if batch.n < 2 {
            return Err(Error::invalid(
                "training needs at least two crops per batch for batch-normalization statistics",
            ));
        }
        Ok(())
    }

    /// Sign pattern of every rectifier output in training mode; two
    /// parameter settings with equal patterns lie on the same smooth piece
    /// of the loss.
    pub fn rectifier_pattern(&self, batch: &Tensor<T>) -> Result<Vec<bool>> {
        self.check_train_batch(batch)?;
        Ok(self
            .forward_cached(batch)
            .iter()
            .filter(|c| c.bn.is_some())
            .flat_map(|c| c.output.data.iter().map(|&v| v > T::zero()))
            .collect())
    }

    /// Training-mode reconstruction loss (batch statistics, no updates).
    pub fn training_loss(&self, batch: &Tensor<T>) -> Result<f64> {
        self.check_train_batch(batch)?;
        let caches = self.forward_cached(batch);
        Ok(mse(&caches.last().unwrap().output.data, &batch.data))
    }

    /// Training-mode loss and exact gradients of every trainable tensor.
    /// Running statistics are not touched; see [`Cae::apply_running_stats`].
    pub fn loss_and_gradients(&self, batch: &Tensor<T>) -> Result<TrainStep<T>> {
        self.check_train_batch(batch)?;
        let caches = self.forward_cached(batch);
        let out = &caches.last().unwrap().output;
        let loss = mse(&out.data, &batch.data);

        let scale = T::lit(2.0 / batch.data.len() as f64);
        let mut dout = Tensor::from_vec(
            out.n,
            out.h,
            out.w,
            out.c,
            out.data.iter().zip(&batch.data).map(|(&o, &x)| scale * (o - x)).collect(),
        );
        let mut per_layer: Vec<Vec<Vec<T>>> = vec![Vec::new(); self.layers.len()];
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let cache = &caches[idx];
            let mut bn_grads = None;
            let dz = match (&layer.bn, &cache.bn) {
                (Some(bn), Some(bc)) => {
                    for (d, &y) in dout.data.iter_mut().zip(&cache.output.data) {
                        if y <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    let (dz, dg, db) = bn.backward(&dout, bc);
                    bn_grads = Some((dg, db));
                    dz
                }
                _ => {
                    for (d, &s) in dout.data.iter_mut().zip(&cache.output.data) {
                        *d *= s * (T::one() - s);
                    }
                    dout
                }
            };
            let need_dx = idx > 0;
            let (dw, db, dx) = if layer.transposed {
                tconv_backward(&cache.input, &dz, &layer.conv, need_dx)
            } else {
                conv_backward(&cache.input, &dz, &layer.conv, need_dx)
            };
            let mut grads = vec![dw, db];
            if let Some((dg, dbeta)) = bn_grads {
                grads.push(dg);
                grads.push(dbeta);
            }
            if self.frozen[idx] {
                grads.iter_mut().for_each(|g| g.fill(T::zero()));
            }
            per_layer[idx] = grads;
            dout = match dx {
                Some(dx) => dx,
                None => Tensor::zeros(0, 0, 0, 0),
            };
        }
        Ok(TrainStep {
            loss,
            gradients: Gradients { tensors: per_layer.into_iter().flatten().collect() },
            bn_caches: caches.into_iter().map(|c| c.bn).collect(),
        })
    }

    /// Folds the batch statistics of a training step into the running
    /// statistics.
    pub fn apply_running_stats(&mut self, step: &TrainStep<T>) {
        for (layer, cache) in self.layers.iter_mut().zip(&step.bn_caches) {
            if let (Some(bn), Some(c)) = (&mut layer.bn, cache) {
                bn.update_running(c);
            }
        }
    }

    /// Sets every running statistic to the (biased) statistics of `batch`,
    /// layer by layer, so inference reproduces training mode on it.
    pub fn freeze_batch_statistics(&mut self, batch: &Tensor<T>) -> Result<()> {
        self.check_input(batch, true)?;
        let caches = self.forward_cached(batch);
        for (layer, cache) in self.layers.iter_mut().zip(caches) {
            if let (Some(bn), Some(c)) = (&mut layer.bn, cache.bn) {
                bn.running_mean = c.batch_mean.iter().map(|&m| T::lit(m)).collect();
                bn.running_var = c.batch_var.iter().map(|&v| T::lit(v)).collect();
            }
        }
        Ok(())
    }

    /// Training-mode reconstruction (batch statistics).
    pub fn reconstruct_training_mode(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch, true)?;
        Ok(self.forward_cached(batch).pop().unwrap().output)
    }
}

/// Mean of squared differences, accumulated in `f64` in index order.
pub fn mse<T: Real>(output: &[T], target: &[T]) -> f64 {
    let sum: f64 = output
        .iter()
        .zip(target)
        .map(|(&o, &x)| {
            let d = o.to_f64().unwrap() - x.to_f64().unwrap();
            d * d
        })
        .sum();
    sum / output.len() as f64
}

pub(crate) fn planar_from_hwc<T: Real>(
    side: usize,
    channels: usize,
    hwc: &[T],
    f: impl Fn(T) -> f64,
) -> Result<PlanarImage> {
    let space = if channels == 1 { ColorSpace::Gray01 } else { ColorSpace::Lab01 };
    let mut data = vec![0.0; side * side * channels];
    for y in 0..side {
        for x in 0..side {
            for c in 0..channels {
                data[(c * side + y) * side + x] = f(hwc[(y * side + x) * channels + c]);
            }
        }
    }
    PlanarImage::new(side, side, space, data)
}
