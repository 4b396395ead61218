//! HOG features, multi-scale multi-orientation pyramids and window lookups.

mod grid;
mod hog;
mod pyramid;

pub use grid::{CellWindow, FeatureGrid};
pub use hog::{cell_histograms, extract_hog, CellHistograms, HOG_CHANNELS, HOG_ORIENTATIONS};
pub use pyramid::{build_pyramid, lookup, FeaturePyramid, PyramidConfig, PyramidLevel};
