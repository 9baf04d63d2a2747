use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CATALOG_JSON: &str = include_str!("../../data/error_models.json");

/// Per-condition labelling-error standard deviations, in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub condition: String,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl ErrorModel {
    pub fn new(condition: impl Into<String>, sigma_x: f64, sigma_y: f64) -> Result<Self> {
        let model = ErrorModel {
            condition: condition.into(),
            sigma_x,
            sigma_y,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma_x", self.sigma_x), ("sigma_y", self.sigma_y)] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid(format!(
                    "error model `{}`: {name} must be positive and finite, got {s}",
                    self.condition
                )));
            }
        }
        Ok(())
    }

    /// The five shipped conditions.
    pub fn catalog() -> Vec<ErrorModel> {
        serde_json::from_str(CATALOG_JSON).expect("bundled error-model catalog is valid JSON")
    }

    /// Looks a condition up in the catalog by name.
    pub fn by_name(name: &str) -> Result<ErrorModel> {
        Self::catalog()
            .into_iter()
            .find(|m| m.condition == name)
            .ok_or_else(|| {
                let known: Vec<String> = Self::catalog().into_iter().map(|m| m.condition).collect();
                Error::invalid(format!("unknown condition `{name}`; known: {}", known.join(", ")))
            })
    }
}

/// Signed prediction error for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameError {
    pub frame: usize,
    pub dx: f64,
    pub dy: f64,
}

impl FrameError {
    pub fn new(frame: usize, dx: f64, dy: f64) -> Self {
        FrameError { frame, dx, dy }
    }

    pub fn distance(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// `δx²/σx² + δy²/σy²`.
pub fn standardized_squared_error(e: &FrameError, m: &ErrorModel) -> f64 {
    (e.dx / m.sigma_x).powi(2) + (e.dy / m.sigma_y).powi(2)
}
