//! 31-channel HOG (18 signed + 9 unsigned orientation bins + 4 texture
//! energies) plus one boundary-indicator channel that is zero inside the image.

use crate::error::{PoseError, Result};
use crate::raster::Raster;

use super::grid::FeatureGrid;

/// Channels per cell, including the trailing boundary indicator.
pub const HOG_CHANNELS: usize = 32;
/// Signed orientation bins.
pub const HOG_ORIENTATIONS: usize = 18;

const EPS: f64 = 0.0001;
const CLIP: f64 = 0.2;
const TEXTURE_SCALE: f64 = 0.2357;

/// Raw per-cell signed orientation histograms before normalization.
#[derive(Debug, Clone)]
pub struct CellHistograms {
    pub rows: usize,
    pub cols: usize,
    /// `rows * cols * 18`, row-major.
    pub values: Vec<f64>,
}

impl CellHistograms {
    pub fn bin(&self, y: usize, x: usize, o: usize) -> f64 {
        self.values[(y * self.cols + x) * HOG_ORIENTATIONS + o]
    }
}

fn unit_vectors() -> ([f64; 9], [f64; 9]) {
    let mut uu = [0.0; 9];
    let mut vv = [0.0; 9];
    for o in 0..9 {
        let a = o as f64 * std::f64::consts::PI / 9.0;
        uu[o] = a.cos();
        vv[o] = a.sin();
    }
    (uu, vv)
}

/// Gradient histograms with bilinear spatial voting and hard orientation binning.
/// Each pixel votes with its gradient magnitude taken from the color channel with
/// the strongest gradient.
pub fn cell_histograms(image: &Raster, cell_size: usize) -> Result<CellHistograms> {
    let (w, h) = (image.width(), image.height());
    if cell_size == 0 || w < 3 * cell_size || h < 3 * cell_size {
        return Err(PoseError::ImageTooSmall {
            width: w,
            height: h,
            cell_size,
        });
    }
    let rows = h / cell_size;
    let cols = w / cell_size;
    let vis_h = rows * cell_size;
    let vis_w = cols * cell_size;
    let (uu, vv) = unit_vectors();
    let sbin = cell_size as f64;
    let mut hist = vec![0.0; rows * cols * HOG_ORIENTATIONS];

    for y in 1..vis_h - 1 {
        for x in 1..vis_w - 1 {
            let px = x.min(w - 2);
            let py = y.min(h - 2);
            let mut best = (0.0, 0.0, -1.0);
            for c in 0..image.channels() {
                let dx = image.get(px + 1, py, c) - image.get(px - 1, py, c);
                let dy = image.get(px, py + 1, c) - image.get(px, py - 1, c);
                let v = dx * dx + dy * dy;
                if v > best.2 {
                    best = (dx, dy, v);
                }
            }
            let (dx, dy, v) = best;
            let mut best_dot = 0.0;
            let mut best_o = 0;
            for o in 0..9 {
                let d = uu[o] * dx + vv[o] * dy;
                if d > best_dot {
                    best_dot = d;
                    best_o = o;
                } else if -d > best_dot {
                    best_dot = -d;
                    best_o = o + 9;
                }
            }
            let v = v.sqrt();
            let xp = (x as f64 + 0.5) / sbin - 0.5;
            let yp = (y as f64 + 0.5) / sbin - 0.5;
            let ixp = xp.floor() as isize;
            let iyp = yp.floor() as isize;
            let vx0 = xp - ixp as f64;
            let vy0 = yp - iyp as f64;
            let vx1 = 1.0 - vx0;
            let vy1 = 1.0 - vy0;
            let mut vote = |cy: isize, cx: isize, wgt: f64| {
                if cy >= 0 && cx >= 0 && (cy as usize) < rows && (cx as usize) < cols {
                    hist[(cy as usize * cols + cx as usize) * HOG_ORIENTATIONS + best_o] += wgt * v;
                }
            };
            vote(iyp, ixp, vx1 * vy1);
            vote(iyp, ixp + 1, vx0 * vy1);
            vote(iyp + 1, ixp, vx1 * vy0);
            vote(iyp + 1, ixp + 1, vx0 * vy0);
        }
    }
    Ok(CellHistograms {
        rows,
        cols,
        values: hist,
    })
}

/// HOG descriptor grid. The outermost ring of histogram cells only feeds the
/// normalization, so an image of `R x C` whole cells yields `(R-2) x (C-2)`
/// descriptor cells; descriptor cell `(y, x)` is centered on pixel coordinate
/// `((x + 1.5) * cell_size, (y + 1.5) * cell_size)`.
pub fn extract_hog(image: &Raster, cell_size: usize) -> Result<FeatureGrid> {
    let hist = cell_histograms(image, cell_size)?;
    let (hr, hc) = (hist.rows, hist.cols);
    let mut norm = vec![0.0; hr * hc];
    for y in 0..hr {
        for x in 0..hc {
            let mut s = 0.0;
            for o in 0..9 {
                let v = hist.bin(y, x, o) + hist.bin(y, x, o + 9);
                s += v * v;
            }
            norm[y * hc + x] = s;
        }
    }
    let n = |y: usize, x: usize| norm[y * hc + x];
    let out_r = hr - 2;
    let out_c = hc - 2;
    let mut cells = vec![0.0; out_r * out_c * HOG_CHANNELS];
    for y in 0..out_r {
        for x in 0..out_c {
            let n1 = 1.0 / (n(y + 1, x + 1) + n(y + 1, x + 2) + n(y + 2, x + 1) + n(y + 2, x + 2) + EPS).sqrt();
            let n2 = 1.0 / (n(y, x + 1) + n(y, x + 2) + n(y + 1, x + 1) + n(y + 1, x + 2) + EPS).sqrt();
            let n3 = 1.0 / (n(y + 1, x) + n(y + 1, x + 1) + n(y + 2, x) + n(y + 2, x + 1) + EPS).sqrt();
            let n4 = 1.0 / (n(y, x) + n(y, x + 1) + n(y + 1, x) + n(y + 1, x + 1) + EPS).sqrt();
            let dst = &mut cells[(y * out_c + x) * HOG_CHANNELS..(y * out_c + x + 1) * HOG_CHANNELS];
            let mut t = [0.0; 4];
            for o in 0..HOG_ORIENTATIONS {
                let src = hist.bin(y + 1, x + 1, o);
                let h = [
                    (src * n1).min(CLIP),
                    (src * n2).min(CLIP),
                    (src * n3).min(CLIP),
                    (src * n4).min(CLIP),
                ];
                dst[o] = 0.5 * (h[0] + h[1] + h[2] + h[3]);
                for k in 0..4 {
                    t[k] += h[k];
                }
            }
            for o in 0..9 {
                let src = hist.bin(y + 1, x + 1, o) + hist.bin(y + 1, x + 1, o + 9);
                let h = [
                    (src * n1).min(CLIP),
                    (src * n2).min(CLIP),
                    (src * n3).min(CLIP),
                    (src * n4).min(CLIP),
                ];
                dst[HOG_ORIENTATIONS + o] = 0.5 * (h[0] + h[1] + h[2] + h[3]);
            }
            for k in 0..4 {
                dst[27 + k] = TEXTURE_SCALE * t[k];
            }
            dst[31] = 0.0;
        }
    }
    let mut grid = FeatureGrid::from_cells(out_r, out_c, HOG_CHANNELS, &cells, 0)?;
    grid.cell_size = cell_size;
    Ok(grid)
}
