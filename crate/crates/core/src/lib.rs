pub mod error;
pub mod cli;
pub mod eval;
pub mod features;
pub mod gdt;
pub mod geometry;
pub mod graph;
pub mod inference;
pub mod io;
pub mod learning;
pub mod model;
pub mod phraselets;
pub mod pipeline;
pub mod raster;
pub mod two_trees;

pub use error::{PoseError, Result};
