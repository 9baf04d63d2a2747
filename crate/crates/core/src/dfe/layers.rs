//! Layer kernels on batched HWC tensors.
//!
//! Convolution weights are laid out `[ky][kx][cin][cout]`. Each output
//! position accumulates over `(ky, kx, cin)` in that order with the bias
//! added last, so a position's value does not depend on how large the
//! surrounding tensor is.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the network can run in.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Batch of `n` images of `h`×`w`×`c`, HWC per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Tensor { n, h, w, c, data: vec![T::zero(); n * h * w * c] }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, c: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * h * w * c, "tensor data length");
        Tensor { n, h, w, c, data }
    }

    pub fn sample_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn sample(&self, s: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[s * len..(s + 1) * len]
    }

    pub(crate) fn at(&self, s: usize, y: usize, x: usize) -> usize {
        ((s * self.h + y) * self.w + x) * self.c
    }
}

/// Weights of a (transposed) convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights<T> {
    pub kernel: usize,
    pub cin: usize,
    pub cout: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvWeights<T> {
    pub fn zeros(kernel: usize, cin: usize, cout: usize) -> Self {
        ConvWeights {
            kernel,
            cin,
            cout,
            weight: vec![T::zero(); kernel * kernel * cin * cout],
            bias: vec![T::zero(); cout],
        }
    }
}

#[inline]
fn axpy<T: Real>(acc: &mut [T], v: T, w: &[T]) {
    for (a, &b) in acc.iter_mut().zip(w) {
        *a += v * b;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

/// Valid convolution: `h×w` → `(h−k+1)×(w−k+1)`.
pub fn conv_forward<T: Real>(x: &Tensor<T>, l: &ConvWeights<T>) -> Tensor<T> {
    let k = l.kernel;
    debug_assert_eq!(x.c, l.cin);
    let (oh, ow, co) = (x.h + 1 - k, x.w + 1 - k, l.cout);
    let mut out = Tensor::zeros(x.n, oh, ow, co);
    let span = k * l.cin;
    let mut acc = vec![T::zero(); co];
    for s in 0..x.n {
        for oy in 0..oh {
            for ox in 0..ow {
                acc.fill(T::zero());
                for ky in 0..k {
                    let base = x.at(s, oy + ky, ox);
                    let wbase = ky * span * co;
                    for j in 0..span {
                        axpy(&mut acc, x.data[base + j], &l.weight[wbase + j * co..wbase + (j + 1) * co]);
                    }
                }
                let o = out.at(s, oy, ox);
                for (dst, (&a, &b)) in out.data[o..o + co].iter_mut().zip(acc.iter().zip(&l.bias)) {
                    *dst = a + b;
                }
            }
        }
    }
    out
}

/// Gradients of a convolution; `dx` only when requested.
pub fn conv_backward<T: Real>(
    x: &Tensor<T>,
    dout: &Tensor<T>,
    l: &ConvWeights<T>,
    need_dx: bool,
) -> (Vec<T>, Vec<T>, Option<Tensor<T>>) {
    let k = l.kernel;
    let co = l.cout;
    let span = k * l.cin;
    let mut dw = vec![T::zero(); l.weight.len()];
    let mut db = vec![T::zero(); co];
    let mut dx = need_dx.then(|| Tensor::zeros(x.n, x.h, x.w, x.c));
    for s in 0..x.n {
        for oy in 0..dout.h {
            for ox in 0..dout.w {
                let o = dout.at(s, oy, ox);
                let g = &dout.data[o..o + co];
                for (d, &v) in db.iter_mut().zip(g) {
                    *d += v;
                }
                for ky in 0..k {
                    let base = x.at(s, oy + ky, ox);
                    let wbase = ky * span * co;
                    for j in 0..span {
                        let wr = wbase + j * co..wbase + (j + 1) * co;
                        axpy(&mut dw[wr.clone()], x.data[base + j], g);
                        if let Some(dx) = dx.as_mut() {
                            dx.data[base + j] += dot(&l.weight[wr], g);
                        }
                    }
                }
            }
        }
    }
    (dw, db, dx)
}

/// Transposed valid convolution: `h×w` → `(h+k−1)×(w+k−1)`.
pub fn tconv_forward<T: Real>(x: &Tensor<T>, l: &ConvWeights<T>) -> Tensor<T> {
    let k = l.kernel;
    debug_assert_eq!(x.c, l.cin);
    let (oh, ow, co) = (x.h + k - 1, x.w + k - 1, l.cout);
    let mut out = Tensor::zeros(x.n, oh, ow, co);
    for s in 0..x.n {
        for iy in 0..x.h {
            for ix in 0..x.w {
                let src = x.at(s, iy, ix);
                for c in 0..l.cin {
                    let v = x.data[src + c];
                    if v == T::zero() {
                        continue;
                    }
                    for ky in 0..k {
                        for kx in 0..k {
                            let o = out.at(s, iy + ky, ix + kx);
                            let wb = ((ky * k + kx) * l.cin + c) * co;
                            axpy(&mut out.data[o..o + co], v, &l.weight[wb..wb + co]);
                        }
                    }
                }
            }
        }
    }
    for px in out.data.chunks_exact_mut(co) {
        for (d, &b) in px.iter_mut().zip(&l.bias) {
            *d += b;
        }
    }
    out
}

/// Gradients of a transposed convolution.
pub fn tconv_backward<T: Real>(
    x: &Tensor<T>,
    dout: &Tensor<T>,
    l: &ConvWeights<T>,
    need_dx: bool,
) -> (Vec<T>, Vec<T>, Option<Tensor<T>>) {
    let k = l.kernel;
    let co = l.cout;
    let mut dw = vec![T::zero(); l.weight.len()];
    let mut db = vec![T::zero(); co];
    for g in dout.data.chunks_exact(co) {
        for (d, &v) in db.iter_mut().zip(g) {
            *d += v;
        }
    }
    let mut dx = need_dx.then(|| Tensor::zeros(x.n, x.h, x.w, x.c));
    for s in 0..x.n {
        for iy in 0..x.h {
            for ix in 0..x.w {
                let src = x.at(s, iy, ix);
                for c in 0..l.cin {
                    let v = x.data[src + c];
                    let mut acc = T::zero();
                    for ky in 0..k {
                        for kx in 0..k {
                            let o = dout.at(s, iy + ky, ix + kx);
                            let g = &dout.data[o..o + co];
                            let wb = ((ky * k + kx) * l.cin + c) * co;
                            axpy(&mut dw[wb..wb + co], v, g);
                            if need_dx {
                                acc += dot(&l.weight[wb..wb + co], g);
                            }
                        }
                    }
                    if let Some(dx) = dx.as_mut() {
                        dx.data[src + c] = acc;
                    }
                }
            }
        }
    }
    (dw, db, dx)
}

/// Batch-normalization parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Values kept from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub count: usize,
}

impl<T: Real> BatchNorm<T> {
    pub fn identity(channels: usize) -> Self {
        BatchNorm {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with the batch's own per-channel statistics (biased
    /// variance) over every sample and position.
    pub fn forward_train(&self, x: &Tensor<T>) -> (Tensor<T>, BnCache<T>) {
        let c = x.c;
        let count = x.n * x.h * x.w;
        let mut mean = vec![0.0f64; c];
        for px in x.data.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(px) {
                *m += v.to_f64().unwrap();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0f64; c];
        for px in x.data.chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(px).zip(&mean) {
                *s += (v.to_f64().unwrap() - m).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<T> = var.iter().map(|v| T::lit(1.0 / (v + BN_EPSILON).sqrt())).collect();
        let mean_t: Vec<T> = mean.iter().map(|&m| T::lit(m)).collect();
        let mut xhat = vec![T::zero(); x.data.len()];
        let mut out = Tensor::zeros(x.n, x.h, x.w, c);
        for ((px, xh), o) in x
            .data
            .chunks_exact(c)
            .zip(xhat.chunks_exact_mut(c))
            .zip(out.data.chunks_exact_mut(c))
        {
            for j in 0..c {
                xh[j] = (px[j] - mean_t[j]) * inv_std[j];
                o[j] = self.gamma[j] * xh[j] + self.beta[j];
            }
        }
        let cache = BnCache { xhat, inv_std, batch_mean: mean, batch_var: var, count };
        (out, cache)
    }

    /// `running ← momentum·running + (1 − momentum)·batch`, using the
    /// unbiased batch variance.
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        let m = BN_MOMENTUM;
        let correction = cache.count as f64 / (cache.count as f64 - 1.0).max(1.0);
        for j in 0..self.channels() {
            let rm = self.running_mean[j].to_f64().unwrap();
            let rv = self.running_var[j].to_f64().unwrap();
            self.running_mean[j] = T::lit(m * rm + (1.0 - m) * cache.batch_mean[j]);
            self.running_var[j] = T::lit(m * rv + (1.0 - m) * cache.batch_var[j] * correction);
        }
    }

    /// Per-channel `(scale, shift)` of inference mode.
    pub fn inference_affine(&self) -> (Vec<T>, Vec<T>) {
        let eps = T::lit(BN_EPSILON);
        let scale: Vec<T> = (0..self.channels())
            .map(|j| self.gamma[j] / (self.running_var[j] + eps).sqrt())
            .collect();
        let shift = (0..self.channels())
            .map(|j| self.beta[j] - self.running_mean[j] * scale[j])
            .collect();
        (scale, shift)
    }

    pub fn forward_infer(&self, x: &mut Tensor<T>) {
        let (scale, shift) = self.inference_affine();
        for px in x.data.chunks_exact_mut(x.c) {
            for j in 0..px.len() {
                px[j] = px[j] * scale[j] + shift[j];
            }
        }
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub fn backward(&self, dy: &Tensor<T>, cache: &BnCache<T>) -> (Tensor<T>, Vec<T>, Vec<T>) {
        let c = dy.c;
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for (g, xh) in dy.data.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for j in 0..c {
                dbeta[j] += g[j];
                dgamma[j] += g[j] * xh[j];
            }
        }
        let m = T::lit(cache.count as f64);
        let mut dx = Tensor::zeros(dy.n, dy.h, dy.w, c);
        for ((g, xh), o) in dy
            .data
            .chunks_exact(c)
            .zip(cache.xhat.chunks_exact(c))
            .zip(dx.data.chunks_exact_mut(c))
        {
            for j in 0..c {
                let k = self.gamma[j] * cache.inv_std[j] / m;
                o[j] = k * (m * g[j] - dbeta[j] - xh[j] * dgamma[j]);
            }
        }
        (dx, dgamma, dbeta)
    }
}

pub fn relu_inplace<T: Real>(x: &mut Tensor<T>) {
    for v in x.data.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

pub fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}
