//! Files in and out: annotations, binary model files, configuration and
//! synthetic data.

pub mod annotations;
pub mod config;
pub mod format;
pub mod synth;

pub use annotations::{load_annotations, save_annotations, AnnotationSet, PersonRecord};
pub use config::RunConfig;
pub use format::{load, save};
