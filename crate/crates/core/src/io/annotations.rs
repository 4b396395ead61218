//! Line-delimited JSON annotations.
//!
//! One person per line:
//!
//! ```text
//! {"image":"images/0001.png","width":128,"height":128,
//!  "keypoints":[[x,y,visible], ... 14 entries],"categories":["dance"]}
//! ```
//!
//! Keypoints are in pixels, in the order of [`KEYPOINT_NAMES`]. `width`,
//! `height` and `categories` are optional; with a size present, keypoints
//! outside the image are clamped to its border with a warning.

use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::geometry::Point;
use crate::graph::{AuxOffsets, PartGraph, KEYPOINT_NAMES, NUM_KEYPOINTS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    /// `(x, y, visible)` per keypoint.
    pub keypoints: Vec<(f64, f64, bool)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl PersonRecord {
    pub fn points(&self) -> Vec<Point> {
        self.keypoints.iter().map(|&(x, y, _)| Point::new(x, y)).collect()
    }

    /// Positions of every node of `graph`, auxiliary nodes included.
    pub fn node_positions(&self, graph: &PartGraph, offsets: &AuxOffsets) -> Vec<Point> {
        graph.node_positions(&self.points(), offsets)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub records: Vec<PersonRecord>,
}

impl AnnotationSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn check(mut r: PersonRecord, path: &Path, line: usize) -> Result<PersonRecord> {
    let bad = |message: String| PoseError::MalformedRecord {
        path: path.to_path_buf(),
        line,
        message,
    };
    if r.keypoints.len() != NUM_KEYPOINTS {
        return Err(bad(format!("{} keypoints, expected {NUM_KEYPOINTS}", r.keypoints.len())));
    }
    for (k, kp) in r.keypoints.iter_mut().enumerate() {
        if !kp.0.is_finite() || !kp.1.is_finite() {
            return Err(bad(format!("{} is not finite", KEYPOINT_NAMES[k])));
        }
        if let (Some(w), Some(h)) = (r.width, r.height) {
            let (x, y) = (kp.0.clamp(0.0, (w as f64 - 1.0).max(0.0)), kp.1.clamp(0.0, (h as f64 - 1.0).max(0.0)));
            if (x, y) != (kp.0, kp.1) {
                warn!(
                    "{}:{line}: {} at ({}, {}) clamped into {w}x{h}",
                    path.display(),
                    KEYPOINT_NAMES[k],
                    kp.0,
                    kp.1
                );
                kp.0 = x;
                kp.1 = y;
            }
        }
    }
    Ok(r)
}

pub fn parse_annotations(text: &str, path: &Path) -> Result<AnnotationSet> {
    let mut records = Vec::new();
    let mut lines = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let r: PersonRecord = serde_json::from_str(line).map_err(|e| PoseError::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(check(r, path, i + 1)?);
    }
    debug_assert_eq!(lines, records.len());
    info!("{}: {} person records", path.display(), records.len());
    Ok(AnnotationSet { records })
}

pub fn load_annotations(path: &Path) -> Result<AnnotationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| PoseError::io(path, e))?;
    parse_annotations(&text, path)
}

pub fn annotations_to_string(set: &AnnotationSet) -> String {
    let mut s = String::new();
    for r in &set.records {
        s.push_str(&serde_json::to_string(r).expect("records always encode"));
        s.push('\n');
    }
    s
}

pub fn save_annotations(set: &AnnotationSet, path: &Path) -> Result<()> {
    std::fs::write(path, annotations_to_string(set)).map_err(|e| PoseError::io(path, e))
}
