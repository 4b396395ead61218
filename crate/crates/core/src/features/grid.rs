use crate::error::{PoseError, Result};

/// A rectangular block of cells, top-left at `(y0, x0)` in unpadded cell
/// coordinates (may be negative to reach into the padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellWindow {
    pub y0: i32,
    pub x0: i32,
    pub rows: usize,
    pub cols: usize,
}

impl CellWindow {
    pub fn new(y0: i32, x0: i32, rows: usize, cols: usize) -> Self {
        CellWindow { y0, x0, rows, cols }
    }

    /// Window of `rows x cols` cells whose anchor cell is `(y, x)`.
    pub fn centered(y: i32, x: i32, rows: usize, cols: usize) -> Self {
        CellWindow {
            y0: y - (rows / 2) as i32,
            x0: x - (cols / 2) as i32,
            rows,
            cols,
        }
    }
}

/// Cells of one `(scale, orientation)` slot. Stored with `pad` virtual cells on
/// every side; a virtual cell is zero except for its last channel, which is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    rows: usize,
    cols: usize,
    channels: usize,
    pad: usize,
    data: Vec<f64>,
    pub cell_size: usize,
    /// Source-image pixels per level pixel.
    pub scale: f64,
    /// Rotation applied before extraction, radians.
    pub orientation: f64,
}

impl FeatureGrid {
    /// Builds a grid from unpadded row-major cells (`rows * cols * channels` values).
    pub fn from_cells(
        rows: usize,
        cols: usize,
        channels: usize,
        cells: &[f64],
        pad: usize,
    ) -> Result<Self> {
        if channels == 0 || cells.len() != rows * cols * channels {
            return Err(PoseError::InvalidArgument(format!(
                "{} cell values for a {rows}x{cols}x{channels} grid",
                cells.len()
            )));
        }
        let prow = cols + 2 * pad;
        let total_rows = rows + 2 * pad;
        let mut data = vec![0.0; total_rows * prow * channels];
        for cell in data.chunks_exact_mut(channels) {
            cell[channels - 1] = 1.0;
        }
        for y in 0..rows {
            let src = &cells[y * cols * channels..(y + 1) * cols * channels];
            let start = ((y + pad) * prow + pad) * channels;
            data[start..start + cols * channels].copy_from_slice(src);
        }
        Ok(FeatureGrid {
            rows,
            cols,
            channels,
            pad,
            data,
            cell_size: 0,
            scale: 1.0,
            orientation: 0.0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Padded row stride in values.
    #[inline]
    fn stride(&self) -> usize {
        (self.cols + 2 * self.pad) * self.channels
    }

    /// Channel vector of an interior cell.
    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        assert!(y < self.rows && x < self.cols, "cell ({y},{x}) outside grid");
        self.padded_cell(y as i32, x as i32).expect("interior cell")
    }

    /// Channel vector of any cell inside the padded extent.
    pub fn padded_cell(&self, y: i32, x: i32) -> Option<&[f64]> {
        let py = y + self.pad as i32;
        let px = x + self.pad as i32;
        if py < 0
            || px < 0
            || py as usize >= self.rows + 2 * self.pad
            || px as usize >= self.cols + 2 * self.pad
        {
            return None;
        }
        let start = py as usize * self.stride() + px as usize * self.channels;
        Some(&self.data[start..start + self.channels])
    }

    /// Unpadded cells, row-major.
    pub fn cells(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols * self.channels);
        for y in 0..self.rows {
            for x in 0..self.cols {
                out.extend_from_slice(self.cell(y, x));
            }
        }
        out
    }

    pub fn with_padding(&self, pad: usize) -> FeatureGrid {
        let mut g = FeatureGrid::from_cells(self.rows, self.cols, self.channels, &self.cells(), pad)
            .expect("consistent dimensions");
        g.cell_size = self.cell_size;
        g.scale = self.scale;
        g.orientation = self.orientation;
        g
    }

    pub fn contains_window(&self, w: &CellWindow) -> bool {
        let p = self.pad as i32;
        w.y0 >= -p
            && w.x0 >= -p
            && w.y0 + w.rows as i32 <= self.rows as i32 + p
            && w.x0 + w.cols as i32 <= self.cols as i32 + p
    }

    /// Row-major flattening of a window, `rows * cols * channels` values.
    pub fn window(&self, w: &CellWindow) -> Result<Vec<f64>> {
        if !self.contains_window(w) {
            return Err(PoseError::LookupOutOfRange(format!(
                "window {w:?} outside {}x{} grid with padding {}",
                self.rows, self.cols, self.pad
            )));
        }
        let mut out = Vec::with_capacity(w.rows * w.cols * self.channels);
        for r in 0..w.rows {
            let start = self.offset(w.y0 + r as i32, w.x0);
            out.extend_from_slice(&self.data[start..start + w.cols * self.channels]);
        }
        Ok(out)
    }

    #[inline]
    fn offset(&self, y: i32, x: i32) -> usize {
        (y + self.pad as i32) as usize * self.stride() + (x + self.pad as i32) as usize * self.channels
    }

    /// Dot product of a row-major template with a window, accumulated in
    /// flattened row-major order. The caller guarantees the window lies inside
    /// the padded extent.
    #[inline]
    pub fn window_dot(&self, template: &[f64], w: &CellWindow) -> f64 {
        debug_assert!(self.contains_window(w));
        let row_len = w.cols * self.channels;
        let mut acc = 0.0;
        for r in 0..w.rows {
            let start = self.offset(w.y0 + r as i32, w.x0);
            let cells = &self.data[start..start + row_len];
            let t = &template[r * row_len..(r + 1) * row_len];
            for (a, b) in t.iter().zip(cells) {
                acc += a * b;
            }
        }
        acc
    }

    /// Four window dot products at once; each result is bit-identical to
    /// [`FeatureGrid::window_dot`] on that window.
    #[inline]
    pub fn window_dot4(&self, template: &[f64], ws: &[CellWindow; 4]) -> [f64; 4] {
        let rows = ws[0].rows;
        let row_len = ws[0].cols * self.channels;
        let mut acc = [0.0f64; 4];
        for r in 0..rows {
            let t = &template[r * row_len..(r + 1) * row_len];
            let s0 = self.offset(ws[0].y0 + r as i32, ws[0].x0);
            let s1 = self.offset(ws[1].y0 + r as i32, ws[1].x0);
            let s2 = self.offset(ws[2].y0 + r as i32, ws[2].x0);
            let s3 = self.offset(ws[3].y0 + r as i32, ws[3].x0);
            let c0 = &self.data[s0..s0 + row_len];
            let c1 = &self.data[s1..s1 + row_len];
            let c2 = &self.data[s2..s2 + row_len];
            let c3 = &self.data[s3..s3 + row_len];
            for k in 0..row_len {
                let tk = t[k];
                acc[0] += tk * c0[k];
                acc[1] += tk * c1[k];
                acc[2] += tk * c2[k];
                acc[3] += tk * c3[k];
            }
        }
        acc
    }
}
