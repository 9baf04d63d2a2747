use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::gamma::{chi2_cdf, chi2_sf};
use super::model::{standardized_squared_error, ErrorModel, FrameError};
use crate::error::{Error, Result};

/// Smallest positive double; p-values below it are reported as 0 with the
/// underflow flag.
pub const P_UNDERFLOW: f64 = 5.0e-324;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub underflow: bool,
}

impl ChiSquareReport {
    /// Whether the labelling-noise null hypothesis is rejected at `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Sum of standardized squared errors tested against χ² with `2n` dof.
pub fn chi2_statistic(errors: &[FrameError], m: &ErrorModel) -> Result<ChiSquareReport> {
    if errors.is_empty() {
        return Err(Error::invalid("chi-square statistic needs at least one frame"));
    }
    m.validate()?;
    let statistic: f64 = errors.iter().map(|e| standardized_squared_error(e, m)).sum();
    if !statistic.is_finite() {
        return Err(Error::Numeric(format!("chi-square statistic is {statistic}")));
    }
    let dof = 2 * errors.len();
    let p = chi2_sf(statistic, dof as f64)?;
    let underflow = p < P_UNDERFLOW;
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value: if underflow { 0.0 } else { p },
        underflow,
    })
}

/// Points of a P-P plot: `(theoretical, empirical)` percentiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpPlot {
    pub points: Vec<(f64, f64)>,
    /// Largest `|empirical − theoretical|`, including the left limit of each
    /// empirical step.
    pub max_deviation: f64,
}

/// P-P data of standardized squared errors against the 2-dof chi-square CDF.
pub fn pp_plot_data(errors: &[FrameError], m: &ErrorModel) -> Result<PpPlot> {
    if errors.len() < 2 {
        return Err(Error::invalid("P-P plot needs at least two frames"));
    }
    m.validate()?;
    let mut s: Vec<f64> = errors.iter().map(|e| standardized_squared_error(e, m)).collect();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut points = Vec::with_capacity(s.len());
    let mut max_deviation = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let theo = chi2_cdf(v, 2.0)?;
        let emp = (i + 1) as f64 / n;
        max_deviation = max_deviation.max((emp - theo).abs()).max((theo - i as f64 / n).abs());
        points.push((theo, emp));
    }
    Ok(PpPlot { points, max_deviation })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityCheck {
    pub max_deviation: f64,
    /// `(standardized value, empirical CDF, normal CDF)` per sorted sample;
    /// the empirical value is the midpoint of its step.
    pub curve: Vec<(f64, f64, f64)>,
}

/// Compares the empirical CDF of `values / sd(values)` with `Φ`.
///
/// Values are scaled, not centered: they are errors against a reference and
/// their mean is part of what is being checked. The empirical CDF is taken
/// at the midpoint of each step, so quantized data is compared at its
/// levels rather than at the jump edges.
pub fn normal_cdf_check(values: &[f64]) -> Result<NormalityCheck> {
    if values.len() < 10 {
        return Err(Error::invalid("normality check needs at least ten values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("normality check values must be finite"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::invalid("normality check values have zero variance"));
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = values.iter().map(|v| v / sd).collect();
    z.sort_unstable_by(f64::total_cmp);
    let mut curve = Vec::with_capacity(z.len());
    let mut max_deviation = 0.0f64;
    let mut i = 0;
    while i < z.len() {
        // Ties form one step.
        let mut j = i;
        while j + 1 < z.len() && z[j + 1] == z[i] {
            j += 1;
        }
        let phi = normal_cdf(z[i]);
        let mid = (i + j + 1) as f64 / (2.0 * n);
        max_deviation = max_deviation.max((mid - phi).abs());
        for _ in i..=j {
            curve.push((z[i], mid, phi));
        }
        i = j + 1;
    }
    Ok(NormalityCheck { max_deviation, curve })
}

/// One repeated labelling attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relabel {
    pub image_id: u64,
    pub attempt: u32,
    pub x: f64,
    pub y: f64,
}

/// Estimates σx, σy from repeated labels: each attempt's error is taken
/// against the mean of its image's attempts, pooled over images with
/// `N − G` degrees of freedom.
pub fn calibrate_error_model(condition: &str, relabels: &[Relabel]) -> Result<ErrorModel> {
    let mut groups: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in relabels {
        if !r.x.is_finite() || !r.y.is_finite() {
            return Err(Error::invalid(format!("non-finite label for image {}", r.image_id)));
        }
        groups.entry(r.image_id).or_default().push((r.x, r.y));
    }
    let n = relabels.len();
    let g = groups.len();
    if n <= g {
        return Err(Error::invalid(
            "calibration needs at least one image with two or more attempts",
        ));
    }
    let (mut sxx, mut syy) = (0.0, 0.0);
    for pts in groups.values() {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        for p in pts {
            sxx += (p.0 - mx).powi(2);
            syy += (p.1 - my).powi(2);
        }
    }
    let dof = (n - g) as f64;
    let (sigma_x, sigma_y) = ((sxx / dof).sqrt(), (syy / dof).sqrt());
    if sigma_x == 0.0 || sigma_y == 0.0 {
        return Err(Error::invalid(format!(
            "degenerate relabels: sigma_x = {sigma_x}, sigma_y = {sigma_y}"
        )));
    }
    ErrorModel::new(condition, sigma_x, sigma_y)
}
