//! Descriptor-agnostic dense matching.
//!
//! A reference descriptor is compared against the descriptor of every window
//! center in the current image, giving an SSR landscape. Candidates are
//! screened by the curvature of a quadratic fitted to their 3x3 neighborhood
//! and the survivor is refined to subpixel precision.

mod descriptor;
mod grid;
mod select;
mod surface;

pub use descriptor::{ssr, ssr_landscape, DenseDescriber, Descriptor, DescriptorSet, RawPixelDescriber};
pub use grid::{position_grid, GridCoord, PositionGrid, SsrLandscape};
pub use select::{match_feature, nn_ratio, unmatched_error, MatchOutcome, MatchResult};
pub use surface::{
    classify_critical, fit_3x3, subpixel_minimum, CriticalPoint, SurfaceFit, DEGENERATE_CURVATURE,
};

use crate::error::Result;
use crate::geom::Pixel;
use crate::raster::PlanarImage;

/// Fits the quadratic surface around grid coordinate `center`.
pub fn fit_quadratic_surface(land: &SsrLandscape, center: GridCoord) -> Result<SurfaceFit> {
    let z = land.neighborhood(center).ok_or_else(|| {
        let grid = land.grid();
        let p = grid.center(center);
        crate::error::Error::Border {
            x: p.x as i64,
            y: p.y as i64,
            size: 3,
            width: grid.cols,
            height: grid.rows,
        }
    })?;
    Ok(fit_3x3(&z, land.grid().stride as f64))
}

/// Describes `reference_center` in `reference` and builds its SSR landscape
/// over `current` (both already prepared for `describer`).
pub fn landscape_for(
    describer: &dyn DenseDescriber,
    reference: &PlanarImage,
    reference_center: Pixel,
    current: &PlanarImage,
) -> Result<(Descriptor, SsrLandscape)> {
    let descriptor = describer.describe(reference, reference_center)?;
    let grid = position_grid(current.width(), current.height(), describer.window(), 1)?;
    let set = describer.describe_grid(current, &grid)?;
    let land = ssr_landscape(&descriptor, &grid, &set)?;
    Ok((descriptor, land))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn border_centers_cannot_be_fitted() {
        let grid = position_grid(35, 35, 31, 1).unwrap();
        let land = SsrLandscape::new(grid, vec![1.0; 25]).unwrap();
        assert!(fit_quadratic_surface(&land, GridCoord { col: 0, row: 2 }).is_err());
        let fit = fit_quadratic_surface(&land, GridCoord { col: 2, row: 2 }).unwrap();
        assert!((fit.c(1) - 1.0).abs() < 1e-12);
    }
}
