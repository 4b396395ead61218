use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geometry::Point;
use crate::raster::Raster;

use super::grid::{CellWindow, FeatureGrid};
use super::hog::{extract_hog, HOG_CHANNELS};

/// Pyramid geometry. Level `l` is the image downsampled by
/// `base_scale * scale_step^l`; orientation slot `k` is that level image rotated
/// by `-2πk / orientation_count` about its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    pub cell_size: usize,
    pub scale_step: f64,
    pub base_scale: f64,
    /// Number of levels; 0 means every level on which `min_cells` fits.
    pub levels: usize,
    pub orientation_count: usize,
    /// Virtual cells added around every grid.
    pub padding: usize,
    /// Largest template extent in cells; a level is usable when both grid
    /// dimensions reach it.
    pub min_cells: usize,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        PyramidConfig {
            cell_size: 4,
            scale_step: 2f64.powf(0.25),
            base_scale: 1.0,
            levels: 0,
            orientation_count: 36,
            padding: 5,
            min_cells: 5,
        }
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 {
            return Err(PoseError::Config("cell_size must be positive".into()));
        }
        if !(self.scale_step.is_finite() && self.scale_step > 1.0) && self.levels != 1 {
            return Err(PoseError::Config(format!("scale_step {} must exceed 1", self.scale_step)));
        }
        if !(self.base_scale.is_finite() && self.base_scale > 0.0) {
            return Err(PoseError::Config(format!("base_scale {} must be positive", self.base_scale)));
        }
        if self.orientation_count == 0 {
            return Err(PoseError::Config("orientation_count must be at least 1".into()));
        }
        Ok(())
    }
}

/// One scale of the pyramid: the canonical (slot 0) grid geometry plus one grid
/// per orientation slot and, per slot, where each canonical cell lands.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidLevel {
    /// Source-image pixels per level pixel, per axis.
    pub scale_x: f64,
    pub scale_y: f64,
    pub rows: usize,
    pub cols: usize,
    pub grids: Vec<FeatureGrid>,
    /// `anchors[k][y * cols + x]` is the `(y, x)` cell in slot `k` that holds the
    /// content of canonical cell `(y, x)`.
    pub anchors: Vec<Vec<(i32, i32)>>,
}

impl PyramidLevel {
    #[inline]
    pub fn anchor(&self, slot: usize, y: usize, x: usize) -> (i32, i32) {
        self.anchors[slot][y * self.cols + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<PyramidLevel>,
    pub image_size: (usize, usize),
    pub cell_size: usize,
    pub orientation_count: usize,
    pub scale_step: f64,
}

impl FeaturePyramid {
    /// Wraps pre-computed grids: `grids[level][slot]`, all slots of a level the
    /// same size, anchors the identity. Cell size 1 and unit scale, so cell
    /// `(y, x)` is centered on pixel `(x + 1.5, y + 1.5)`.
    pub fn from_grids(grids: Vec<Vec<FeatureGrid>>) -> Result<Self> {
        let orientation_count = grids.first().map_or(0, |g| g.len());
        if orientation_count == 0 {
            return Err(PoseError::InvalidArgument("empty pyramid".into()));
        }
        let channels = grids[0][0].channels();
        let mut levels = Vec::new();
        for slots in grids {
            if slots.len() != orientation_count {
                return Err(PoseError::InvalidArgument("levels differ in slot count".into()));
            }
            let (rows, cols) = (slots[0].rows(), slots[0].cols());
            if slots
                .iter()
                .any(|g| g.rows() != rows || g.cols() != cols || g.channels() != channels)
            {
                return Err(PoseError::InvalidArgument("slot grids differ in shape".into()));
            }
            let identity: Vec<(i32, i32)> = (0..rows)
                .flat_map(|y| (0..cols).map(move |x| (y as i32, x as i32)))
                .collect();
            levels.push(PyramidLevel {
                scale_x: 1.0,
                scale_y: 1.0,
                rows,
                cols,
                anchors: vec![identity; orientation_count],
                grids: slots,
            });
        }
        let (rows, cols) = (levels[0].rows, levels[0].cols);
        Ok(FeaturePyramid {
            levels,
            image_size: (cols + 2, rows + 2),
            cell_size: 1,
            orientation_count,
            scale_step: 2.0,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn channels(&self) -> usize {
        self.levels[0].grids[0].channels()
    }

    pub fn level(&self, level: usize) -> Result<&PyramidLevel> {
        self.levels.get(level).ok_or_else(|| {
            PoseError::LookupOutOfRange(format!("level {level} of {}", self.levels.len()))
        })
    }

    pub fn grid(&self, level: usize, slot: usize) -> Result<&FeatureGrid> {
        let l = self.level(level)?;
        l.grids.get(slot).ok_or_else(|| {
            PoseError::LookupOutOfRange(format!("orientation slot {slot} of {}", l.grids.len()))
        })
    }

    /// Source-image position of the center of canonical cell `(y, x)` at `level`.
    pub fn cell_center(&self, level: usize, y: i32, x: i32) -> Point {
        let l = &self.levels[level];
        let s = self.cell_size as f64;
        Point::new(
            (x as f64 + 1.5) * s * l.scale_x,
            (y as f64 + 1.5) * s * l.scale_y,
        )
    }

    /// Canonical cell whose center is nearest to source-image point `p`; may lie
    /// outside the grid.
    pub fn pixel_to_cell(&self, level: usize, p: Point) -> (i32, i32) {
        let l = &self.levels[level];
        let s = self.cell_size as f64;
        let y = (p.y / (s * l.scale_y) - 1.5).round() as i32;
        let x = (p.x / (s * l.scale_x) - 1.5).round() as i32;
        (y, x)
    }

    /// Like [`FeaturePyramid::pixel_to_cell`] but clamped into the grid.
    pub fn nearest_cell(&self, level: usize, p: Point) -> (usize, usize) {
        let l = &self.levels[level];
        let (y, x) = self.pixel_to_cell(level, p);
        (
            y.clamp(0, l.rows as i32 - 1) as usize,
            x.clamp(0, l.cols as i32 - 1) as usize,
        )
    }

    /// Level whose cell size in source pixels is closest (in log scale) to
    /// `target_px`.
    pub fn level_for_cell_px(&self, target_px: f64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, l) in self.levels.iter().enumerate() {
            let px = self.cell_size as f64 * 0.5 * (l.scale_x + l.scale_y);
            let d = (px / target_px).ln().abs();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }
}

/// Row-major features of `window` in grid `(level, slot)`.
pub fn lookup(pyramid: &FeaturePyramid, level: usize, slot: usize, window: &CellWindow) -> Result<Vec<f64>> {
    pyramid.grid(level, slot)?.window(window)
}

fn level_size(w: usize, h: usize, factor: f64) -> (usize, usize) {
    (
        ((w as f64 / factor).round() as usize).max(1),
        ((h as f64 / factor).round() as usize).max(1),
    )
}

/// Builds the scale x orientation pyramid. Slot 0 of every level is plain HOG
/// of the resized image.
pub fn build_pyramid(image: &Raster, config: &PyramidConfig) -> Result<FeaturePyramid> {
    config.validate()?;
    let (w, h) = (image.width(), image.height());
    let cs = config.cell_size;
    if w < 3 * cs || h < 3 * cs {
        return Err(PoseError::ImageTooSmall {
            width: w,
            height: h,
            cell_size: cs,
        });
    }
    let fits = |l: usize| {
        let (lw, lh) = level_size(w, h, config.base_scale * config.scale_step.powi(l as i32));
        lw >= 3 * cs && lh >= 3 * cs && lw / cs - 2 >= config.min_cells && lh / cs - 2 >= config.min_cells
    };
    let levels = if config.levels == 0 {
        let mut n = 0;
        while n < 64 && fits(n) {
            n += 1;
        }
        if n == 0 {
            return Err(PoseError::PyramidTooSmall {
                requested: 1,
                usable: Vec::new(),
            });
        }
        n
    } else {
        let usable: Vec<usize> = (0..config.levels).filter(|&l| fits(l)).collect();
        if usable.len() != config.levels {
            return Err(PoseError::PyramidTooSmall {
                requested: config.levels,
                usable,
            });
        }
        config.levels
    };

    let built: Vec<Result<PyramidLevel>> = (0..levels)
        .into_par_iter()
        .map(|l| build_level(image, config, l))
        .collect();
    let levels = built.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FeaturePyramid {
        levels,
        image_size: (w, h),
        cell_size: cs,
        orientation_count: config.orientation_count,
        scale_step: config.scale_step,
    })
}

fn build_level(image: &Raster, config: &PyramidConfig, l: usize) -> Result<PyramidLevel> {
    let (w, h) = (image.width(), image.height());
    let factor = config.base_scale * config.scale_step.powi(l as i32);
    let (lw, lh) = level_size(w, h, factor);
    let level_img = image.resize(lw, lh);
    let scale_x = w as f64 / lw as f64;
    let scale_y = h as f64 / lh as f64;
    let canvas = level_img.rotation_canvas();
    let k_count = config.orientation_count;
    let cs = config.cell_size as f64;

    let slots: Vec<Result<(FeatureGrid, Vec<(i32, i32)>)>> = (0..k_count)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                let grid = extract_hog(&level_img, config.cell_size)?;
                let anchors = (0..grid.rows())
                    .flat_map(|y| (0..grid.cols()).map(move |x| (y as i32, x as i32)))
                    .collect();
                return Ok((grid, anchors));
            }
            let phi = 2.0 * PI * k as f64 / k_count as f64;
            let rotated = level_img.rotate_onto_canvas(phi, canvas);
            let grid = extract_hog(&rotated, config.cell_size)?;
            let rows = lh / config.cell_size - 2;
            let cols = lw / config.cell_size - 2;
            let center = Point::new(lw as f64 / 2.0, lh as f64 / 2.0);
            let cc = canvas as f64 / 2.0;
            let mut anchors = Vec::with_capacity(rows * cols);
            for y in 0..rows {
                for x in 0..cols {
                    let p = Point::new((x as f64 + 1.5) * cs, (y as f64 + 1.5) * cs);
                    let q = p.sub(center).rotate(-phi);
                    let ax = ((q.x + cc) / cs - 1.5).round() as i32;
                    let ay = ((q.y + cc) / cs - 1.5).round() as i32;
                    anchors.push((ay, ax));
                }
            }
            Ok((grid, anchors))
        })
        .collect();

    let mut grids = Vec::with_capacity(k_count);
    let mut anchors = Vec::with_capacity(k_count);
    for s in slots {
        let (g, a) = s?;
        // widen the padding so every anchored window stays readable
        let overhang = a
            .iter()
            .map(|&(y, x)| {
                (-y).max(-x)
                    .max(y - g.rows() as i32 + 1)
                    .max(x - g.cols() as i32 + 1)
                    .max(0) as usize
            })
            .max()
            .unwrap_or(0);
        let mut g = g.with_padding(config.padding + overhang);
        g.scale = 0.5 * (scale_x + scale_y);
        g.orientation = 2.0 * PI * grids.len() as f64 / k_count as f64;
        grids.push(g);
        anchors.push(a);
    }
    debug_assert_eq!(grids[0].channels(), HOG_CHANNELS);
    Ok(PyramidLevel {
        scale_x,
        scale_y,
        rows: grids[0].rows(),
        cols: grids[0].cols(),
        grids,
        anchors,
    })
}
