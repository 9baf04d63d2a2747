use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::model::ErrorModel;
use crate::error::{Error, Result};

/// Default Monte-Carlo sample count for distance CDFs.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 10_000;
const SHARD: usize = 1 << 16;

/// Empirical CDF over sorted samples.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    /// Sorts `samples`; NaN is rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical CDF needs at least one sample"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("empirical CDF samples contain NaN"));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    /// Quantile with linear interpolation between order statistics at
    /// position `q·(n−1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quantile level must lie in [0, 1], got {q}")));
        }
        let n = self.sorted.len();
        let h = q * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = h - lo as f64;
        Ok(self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo]))
    }

    /// Monte-Carlo standard error of the `q` quantile from the spread of the
    /// order statistics one binomial standard deviation either side.
    pub fn quantile_std_error(&self, q: f64) -> Result<f64> {
        let n = self.sorted.len() as f64;
        let delta = (q * (1.0 - q) / n).sqrt();
        let upper = self.quantile((q + delta).min(1.0))?;
        let lower = self.quantile((q - delta).max(0.0))?;
        Ok(0.5 * (upper - lower))
    }
}

/// Draws `samples` radial distances `√(δx²+δy²)` with `δ ~ N(0, σ)`.
///
/// Samples are generated in shards of 65,536, each from its own ChaCha8
/// stream keyed by `(seed, shard index)`, so the result does not depend on
/// the thread count.
pub fn simulate_distance_cdf(m: &ErrorModel, samples: usize, seed: u64) -> Result<EmpiricalCdf> {
    m.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "distance CDF needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let shards = samples.div_ceil(SHARD);
    let (sx, sy) = (m.sigma_x, m.sigma_y);
    let draws: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = SHARD.min(samples - s * SHARD);
            (0..count)
                .map(move |_| {
                    let dx: f64 = StandardNormal.sample(&mut rng);
                    let dy: f64 = StandardNormal.sample(&mut rng);
                    (sx * dx).hypot(sy * dy)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    EmpiricalCdf::new(draws)
}

/// A distance threshold with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub alpha: f64,
    pub pixels: f64,
    pub std_error: f64,
}

/// `(1−α)` quantile of a simulated distance CDF.
pub fn threshold_from_cdf(cdf: &EmpiricalCdf, alpha: f64) -> Result<Threshold> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("significance must lie in (0, 1), got {alpha}")));
    }
    Ok(Threshold {
        alpha,
        pixels: cdf.quantile(1.0 - alpha)?,
        std_error: cdf.quantile_std_error(1.0 - alpha)?,
    })
}

/// Simulates [`DEFAULT_SAMPLES`] distances and returns the `(1−α)` quantile.
pub fn distance_threshold(m: &ErrorModel, alpha: f64, seed: u64) -> Result<Threshold> {
    let cdf = simulate_distance_cdf(m, DEFAULT_SAMPLES, seed)?;
    threshold_from_cdf(&cdf, alpha)
}

/// `e / (1 − F(e))`, or `+∞` once `F(e)` reaches 1.
pub fn weighted_error(e: f64, cdf: &EmpiricalCdf) -> f64 {
    let f = cdf.cdf(e);
    if f >= 1.0 {
        f64::INFINITY
    } else {
        e / (1.0 - f)
    }
}
