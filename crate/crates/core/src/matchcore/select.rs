use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::matchcore::grid::SsrLandscape;
use crate::matchcore::surface::{classify_critical, fit_3x3, subpixel_minimum, CriticalPoint, SurfaceFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchOutcome {
    /// A local-minimum candidate was found and refined inside its 3x3 cell.
    Refined,
    /// The refined minimum fell outside the 3x3 cell; the pixel position is kept.
    OffsetOutsideCell,
    /// No center in the landscape fits a local minimum; the global minimum is reported.
    NoLocalMinimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pixel_pos: Pixel,
    pub subpixel_pos: Point,
    pub ssr_min: f64,
    /// Hessian determinant of the chosen fit; NaN when no fit was accepted.
    pub curvature: f64,
    pub nn_ratio: f64,
    pub accepted: bool,
    pub outcome: MatchOutcome,
}

struct Candidate {
    index: usize,
    fit: SurfaceFit,
}

/// Lowest-SSR center whose fitted surface is a local minimum.
///
/// SSR values are visited in ascending order, grouping exactly equal values.
/// Within the first group that has any local-minimum fit, the center with the
/// largest curvature wins (first in row-major order on ties). Border centers,
/// which lack a 3x3 neighborhood, never qualify.
pub fn match_feature(land: &SsrLandscape) -> Result<MatchResult> {
    if land.is_empty() {
        return Err(Error::invalid("cannot match on an empty landscape"));
    }
    let grid = land.grid();
    let values = land.values();
    let ranked = land.ranked();
    let ratio = if land.len() >= 2 { nn_ratio(land)? } else { 0.0 };

    let mut chosen: Option<Candidate> = None;
    let mut start = 0;
    while start < ranked.len() && chosen.is_none() {
        let value = values[ranked[start]];
        let mut end = start;
        while end < ranked.len() && values[ranked[end]] == value {
            end += 1;
        }
        for &index in &ranked[start..end] {
            let Some(z) = land.neighborhood(grid.coord(index)) else {
                continue;
            };
            let fit = fit_3x3(&z, grid.stride as f64);
            if classify_critical(&fit) != CriticalPoint::LocalMin {
                continue;
            }
            let better = match &chosen {
                None => true,
                Some(best) => fit.curvature() > best.fit.curvature(),
            };
            if better {
                chosen = Some(Candidate { index, fit });
            }
        }
        start = end;
    }

    let Some(best) = chosen else {
        let index = ranked[0];
        let pixel = grid.center(grid.coord(index));
        return Ok(MatchResult {
            pixel_pos: pixel,
            subpixel_pos: pixel.to_point(),
            ssr_min: values[index],
            curvature: f64::NAN,
            nn_ratio: ratio,
            accepted: false,
            outcome: MatchOutcome::NoLocalMinimum,
        });
    };

    let pixel = grid.center(grid.coord(best.index));
    // SSR is non-negative, so an exact zero is the true minimum.
    let offset = if values[best.index] == 0.0 { Point::new(0.0, 0.0) } else { subpixel_minimum(&best.fit)? };
    let cell = grid.stride as f64;
    let inside = offset.x.abs() <= cell && offset.y.abs() <= cell;
    Ok(MatchResult {
        pixel_pos: pixel,
        subpixel_pos: if inside { pixel.to_point() + offset } else { pixel.to_point() },
        ssr_min: values[best.index],
        curvature: best.fit.curvature(),
        nn_ratio: ratio,
        accepted: inside,
        outcome: if inside {
            MatchOutcome::Refined
        } else {
            MatchOutcome::OffsetOutsideCell
        },
    })
}

/// Ratio of the two smallest descriptor distances, `sqrt(ssr1) / sqrt(ssr2)`.
/// Two zero distances count as a perfect tie (ratio 1).
pub fn nn_ratio(land: &SsrLandscape) -> Result<f64> {
    if land.len() < 2 {
        return Err(Error::invalid("nearest-neighbor ratio needs at least two centers"));
    }
    let (mut first, mut second) = (f64::INFINITY, f64::INFINITY);
    for &v in land.values() {
        if v < first {
            second = first;
            first = v;
        } else if v < second {
            second = v;
        }
    }
    if second == 0.0 {
        return Ok(1.0);
    }
    Ok(first.sqrt() / second.sqrt())
}

/// Error charged to a frame a thresholded matcher refuses to match: the
/// image diagonal.
pub fn unmatched_error(width: f64, height: f64) -> f64 {
    width.hypot(height)
}
