//! Second-order surface fit over a 3x3 neighborhood and its critical point.
//!
//! Coefficients use the one-based naming
//! `z = c6*y^2 + c5*x^2 + c4*x*y + c3*y + c2*x + c1`, stored as
//! `coefficients[0] = c1 .. coefficients[5] = c6`. Coordinates are relative to
//! the middle sample, which keeps the system well conditioned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Determinants with magnitude at or below this are treated as zero curvature.
pub const DEGENERATE_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFit {
    pub coefficients: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalPoint {
    LocalMin,
    LocalMax,
    Saddle,
    Degenerate,
}

impl SurfaceFit {
    pub fn c(&self, one_based: usize) -> f64 {
        self.coefficients[one_based - 1]
    }

    pub fn z_xx(&self) -> f64 {
        2.0 * self.c(5)
    }

    pub fn z_yy(&self) -> f64 {
        2.0 * self.c(6)
    }

    pub fn z_xy(&self) -> f64 {
        self.c(4)
    }

    /// Hessian determinant `D = z_xx z_yy - z_xy² = 4 c5 c6 - c4²`.
    pub fn curvature(&self) -> f64 {
        4.0 * self.c(5) * self.c(6) - self.c(4) * self.c(4)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x + c[5] * y * y
    }
}

/// Sylvester's criterion on the fitted Hessian.
pub fn classify_critical(fit: &SurfaceFit) -> CriticalPoint {
    let d = fit.curvature();
    if d.abs() <= DEGENERATE_CURVATURE {
        CriticalPoint::Degenerate
    } else if d > 0.0 && fit.z_xx() > 0.0 {
        CriticalPoint::LocalMin
    } else if d > 0.0 {
        CriticalPoint::LocalMax
    } else {
        CriticalPoint::Saddle
    }
}

/// Zero-gradient point of a local-minimum fit, as an offset from the middle sample.
pub fn subpixel_minimum(fit: &SurfaceFit) -> Result<Point> {
    let kind = classify_critical(fit);
    if kind != CriticalPoint::LocalMin {
        return Err(Error::Precondition(format!(
            "subpixel minimum requested for a {kind:?} surface"
        )));
    }
    let (c2, c3, c4, c5, c6) = (fit.c(2), fit.c(3), fit.c(4), fit.c(5), fit.c(6));
    let d = 4.0 * c5 * c6 - c4 * c4;
    Ok(Point::new(
        (c3 * c4 - 2.0 * c2 * c6) / d,
        (c2 * c4 - 2.0 * c3 * c5) / d,
    ))
}

/// Least-squares fit to nine samples `z[(dy + 1) * 3 + (dx + 1)]` taken at
/// offsets `(dx * spacing, dy * spacing)`, `dx, dy ∈ {-1, 0, 1}`.
pub fn fit_3x3(z: &[f64; 9], spacing: f64) -> SurfaceFit {
    let mut ata = [[0.0; 6]; 6];
    let mut atz = [0.0; 6];
    for dy in -1i32..=1 {
        for dx in -1i32..=1 {
            let (x, y) = (dx as f64 * spacing, dy as f64 * spacing);
            let row = [1.0, x, y, x * y, x * x, y * y];
            let value = z[((dy + 1) * 3 + dx + 1) as usize];
            for i in 0..6 {
                atz[i] += row[i] * value;
                for j in 0..6 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
    }
    SurfaceFit {
        coefficients: solve6(ata, atz),
    }
}

/// Gaussian elimination with partial pivoting; the 3x3 lattice normal matrix
/// is always nonsingular.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> [f64; 6] {
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..6 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; 6];
    for row in (0..6).rev() {
        let mut s = b[row];
        for k in row + 1..6 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}
