//! Labelling-error models and the chi-square evaluation toolkit.
//!
//! Human relabelling noise is modelled as independent zero-mean normal
//! errors in x and y. Under that model the standardized squared error of a
//! frame is χ² with 2 dof and the sum over `n` frames is χ² with `2n` dof,
//! which gives a test of whether a tracker is as good as a human labeller.
//! Radial distance thresholds have no closed form for `σx ≠ σy` and are
//! obtained by Monte-Carlo simulation.

mod gamma;
mod model;
mod simulate;
mod stats;

pub use gamma::{chi2_cdf, chi2_inv, chi2_sf, ln_gamma, regularized_gamma};
pub use model::{standardized_squared_error, ErrorModel, FrameError};
pub use simulate::{
    distance_threshold, simulate_distance_cdf, threshold_from_cdf, weighted_error, EmpiricalCdf, Threshold,
    DEFAULT_SAMPLES, MIN_SAMPLES,
};
pub use stats::{
    calibrate_error_model, chi2_statistic, normal_cdf, normal_cdf_check, pp_plot_data, ChiSquareReport,
    NormalityCheck, PpPlot, Relabel, P_UNDERFLOW,
};
