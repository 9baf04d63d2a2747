use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;

/// Index of a center inside a [`PositionGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCoord {
    pub col: usize,
    pub row: usize,
}

/// Every window center that admits a full window, stepping by `stride`.
///
/// The count per axis is `floor((dim - window) / stride) + 1`, which keeps the
/// trailing position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionGrid {
    pub image_width: usize,
    pub image_height: usize,
    pub window: usize,
    pub stride: usize,
    pub cols: usize,
    pub rows: usize,
}

pub fn position_grid(width: usize, height: usize, window: usize, stride: usize) -> Result<PositionGrid> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!("window must be odd, got {window}")));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if width < window || height < window {
        return Err(Error::invalid(format!(
            "{width}x{height} image is smaller than the {window}-pixel window"
        )));
    }
    Ok(PositionGrid {
        image_width: width,
        image_height: height,
        window,
        stride,
        cols: (width - window) / stride + 1,
        rows: (height - window) / stride + 1,
    })
}

impl PositionGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, g: GridCoord) -> Pixel {
        let half = self.window / 2;
        Pixel::new(half + g.col * self.stride, half + g.row * self.stride)
    }

    pub fn coord(&self, index: usize) -> GridCoord {
        GridCoord {
            col: index % self.cols,
            row: index / self.cols,
        }
    }

    pub fn index(&self, g: GridCoord) -> usize {
        g.row * self.cols + g.col
    }

    /// Row-major centers.
    pub fn centers(&self) -> impl Iterator<Item = Pixel> + '_ {
        (0..self.len()).map(|i| self.center(self.coord(i)))
    }

    /// Grid coordinate of an exact center pixel, if it is on the grid.
    pub fn locate(&self, p: Pixel) -> Option<GridCoord> {
        let half = self.window / 2;
        if p.x < half || p.y < half {
            return None;
        }
        let (dx, dy) = (p.x - half, p.y - half);
        if dx % self.stride != 0 || dy % self.stride != 0 {
            return None;
        }
        let g = GridCoord {
            col: dx / self.stride,
            row: dy / self.stride,
        };
        (g.col < self.cols && g.row < self.rows).then_some(g)
    }

    /// Whether the 3x3 grid neighborhood of `g` is complete.
    pub fn has_full_neighborhood(&self, g: GridCoord) -> bool {
        g.col >= 1 && g.row >= 1 && g.col + 1 < self.cols && g.row + 1 < self.rows
    }
}

/// SSR between a reference descriptor and the descriptor at every grid center.
#[derive(Debug, Clone, PartialEq)]
pub struct SsrLandscape {
    grid: PositionGrid,
    values: Vec<f64>,
}

impl SsrLandscape {
    pub fn new(grid: PositionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "landscape needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("SSR value {v} is not a finite non-negative number")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, g: GridCoord) -> f64 {
        self.values[self.grid.index(g)]
    }

    /// The 3x3 block around `g`, row-major, or `None` at the grid border.
    pub fn neighborhood(&self, g: GridCoord) -> Option<[f64; 9]> {
        if !self.grid.has_full_neighborhood(g) {
            return None;
        }
        let mut z = [0.0; 9];
        for (k, slot) in z.iter_mut().enumerate() {
            let row = g.row + k / 3 - 1;
            let col = g.col + k % 3 - 1;
            *slot = self.values[row * self.grid.cols + col];
        }
        Some(z)
    }

    /// Indices ordered by ascending SSR, ties by row-major position.
    pub fn ranked(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]).then(a.cmp(&b)));
        order
    }

    /// Dense CSV with header `x,y,ssr`, one row per center in row-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "ssr"])?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.center(self.grid.coord(i));
            w.write_record([p.x.to_string(), p.y.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
