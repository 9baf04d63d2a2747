use serde::{Deserialize, Serialize};

use super::layers::Real;
use super::model::Gradients;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamaxConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        AdamaxConfig {
            learning_rate: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adamax state: first moments `m`, infinity-norm accumulators `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adamax<T> {
    pub config: AdamaxConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
}

impl<T: Real> Adamax<T> {
    pub fn new(config: AdamaxConfig, param_lens: &[usize]) -> Self {
        Adamax {
            config,
            step: 0,
            m: param_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            u: param_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One update:
    ///
    /// ```text
    /// m ← β1·m + (1−β1)·g
    /// u ← max(β2·u, |g|)
    /// θ ← θ − lr/(1−β1^t) · m/(u + ε)
    /// ```
    ///
    /// Non-finite gradients abort before anything is modified; `names`
    /// label the offending tensor in the error.
    pub fn apply(&mut self, params: Vec<&mut [T]>, grads: &Gradients<T>, names: &[String]) -> Result<()> {
        if params.len() != self.m.len() || grads.tensors.len() != self.m.len() {
            return Err(Error::invalid(format!(
                "optimizer holds {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.tensors.len()
            )));
        }
        for (i, g) in grads.tensors.iter().enumerate() {
            if g.len() != self.m[i].len() || params[i].len() != g.len() {
                return Err(Error::Shape {
                    layer: names.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
                    expected: vec![self.m[i].len()],
                    found: vec![g.len()],
                });
            }
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient {:?} in `{}` at index {j} (step {})",
                    g[j],
                    names.get(i).map_or("?", String::as_str),
                    self.step + 1
                )));
            }
        }
        self.step += 1;
        let c = self.config;
        let lr_t = T::lit(c.learning_rate / (1.0 - c.beta1.powi(self.step as i32)));
        let (b1, b2, eps) = (T::lit(c.beta1), T::lit(c.beta2), T::lit(c.epsilon));
        let one_minus_b1 = T::lit(1.0 - c.beta1);
        for (((p, g), m), u) in params.into_iter().zip(&grads.tensors).zip(&mut self.m).zip(&mut self.u) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + one_minus_b1 * g[i];
                u[i] = (b2 * u[i]).max(g[i].abs());
                p[i] -= lr_t * m[i] / (u[i] + eps);
            }
        }
        Ok(())
    }
}
