//! Two-pass estimation with the lower- and upper-constrained trees.
//!
//! The lower-constrained model is run first. Its hips, knees and ankles are
//! then fixed in the upper-constrained model, which re-infers the rest of the
//! body around them.

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::FeaturePyramid;
use crate::geometry::Point;
use crate::graph::{is_lower_body_keypoint, NodeBinding, PartGraph, TreeVariant, NUM_KEYPOINTS};
use crate::inference::{infer_max, infer_restricted, CellClamp, Detection, Restriction};
use crate::model::{MixtureModel, PoseConfiguration};

/// Parts fixed to one cell each, all at one pyramid level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    pub level: usize,
    /// `(part, cell)`; an orientation of `None` leaves the part free to turn.
    pub parts: Vec<(usize, CellClamp)>,
}

impl Evidence {
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

/// Best pose with the evidence parts held at their cells. Clamped parts keep
/// their unary scores. Empty evidence is plain [`infer_max`].
pub fn clamp_inference(model: &MixtureModel, pyramid: &FeaturePyramid, evidence: &Evidence) -> Result<Detection> {
    if evidence.is_empty() {
        return infer_max(model, pyramid);
    }
    let n = model.num_parts();
    let lvl = pyramid.level(evidence.level)?;
    let mut clamps = vec![None; n];
    for &(part, c) in &evidence.parts {
        if part >= n {
            return Err(PoseError::InvalidArgument(format!("evidence part {part} of {n}")));
        }
        let oob = |detail: String| PoseError::OutOfBounds {
            part,
            name: model.graph.part(part).name.clone(),
            detail,
        };
        if c.y < 0 || c.x < 0 || c.y as usize >= lvl.rows || c.x as usize >= lvl.cols {
            return Err(oob(format!(
                "evidence cell ({}, {}) outside {}x{} at level {}",
                c.y, c.x, lvl.rows, lvl.cols, evidence.level
            )));
        }
        if let Some(o) = c.orientation {
            if o >= model.orientations() {
                return Err(oob(format!("orientation {o} of {}", model.orientations())));
            }
        }
        if clamps[part].replace(c).is_some() {
            return Err(PoseError::InvalidArgument(format!("part {part} clamped twice")));
        }
    }
    infer_restricted(
        model,
        pyramid,
        &Restriction {
            clamps,
            level: Some(evidence.level),
        },
    )
}

/// Lower- and upper-constrained models over the same features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTreeModel {
    pub lower: MixtureModel,
    pub upper: MixtureModel,
}

fn keypoint_nodes(graph: &PartGraph) -> Vec<Option<usize>> {
    let mut out = vec![None; NUM_KEYPOINTS];
    for (i, p) in graph.parts().iter().enumerate() {
        if let NodeBinding::Keypoint(k) = p.binding {
            out[k] = Some(i);
        }
    }
    out
}

impl TwoTreeModel {
    pub fn new(lower: MixtureModel, upper: MixtureModel) -> Result<Self> {
        let m = TwoTreeModel { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.lower.validate()?;
        self.upper.validate()?;
        if self.lower.graph.variant() != TreeVariant::LowerConstrained {
            return Err(PoseError::Incompatible("first model is not lower-constrained".into()));
        }
        if self.upper.graph.variant() != TreeVariant::UpperConstrained {
            return Err(PoseError::Incompatible("second model is not upper-constrained".into()));
        }
        if self.lower.orientations() != self.upper.orientations()
            || self.lower.channels() != self.upper.channels()
            || self.lower.cell_size != self.upper.cell_size
        {
            return Err(PoseError::Incompatible(
                "lower and upper models differ in features or orientations".into(),
            ));
        }
        let (lo, up) = (keypoint_nodes(&self.lower.graph), keypoint_nodes(&self.upper.graph));
        for k in (0..NUM_KEYPOINTS).filter(|&k| is_lower_body_keypoint(k)) {
            if lo[k].is_none() || up[k].is_none() {
                return Err(PoseError::Incompatible(format!("keypoint {k} missing from a model")));
            }
        }
        Ok(())
    }
}

/// Which tree runs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TreeOrder {
    /// Lower tree first, its legs fixed in the upper tree.
    #[default]
    LowerFirst,
    /// Upper tree first, its arms, shoulders and neck fixed in the lower tree.
    UpperFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoTreePose {
    /// Fourteen keypoints in image pixels.
    pub keypoints: Vec<Point>,
    /// Pose of the first pass.
    pub first: Detection,
    /// Pose of the second, clamped pass.
    pub second: Detection,
    pub order: TreeOrder,
}

/// Fixes, in `target`, every keypoint node of `source_pose` selected by `keep`.
fn evidence_from(
    source: &MixtureModel,
    source_pose: &PoseConfiguration,
    target: &MixtureModel,
    keep: impl Fn(usize) -> bool,
) -> Evidence {
    let (src, dst) = (keypoint_nodes(&source.graph), keypoint_nodes(&target.graph));
    let parts = (0..NUM_KEYPOINTS)
        .filter(|&k| keep(k))
        .filter_map(|k| {
            let (s, d) = (src[k]?, dst[k]?);
            let p = source_pose.parts[s];
            Some((
                d,
                CellClamp {
                    y: p.y,
                    x: p.x,
                    orientation: None,
                },
            ))
        })
        .collect();
    Evidence {
        level: source_pose.level,
        parts,
    }
}

fn keypoints(model: &MixtureModel, pyramid: &FeaturePyramid, pose: &PoseConfiguration) -> Vec<Point> {
    model.graph.keypoints_from_nodes(&pose.pixel_locations(pyramid))
}

/// Runs both trees in `order` and merges their halves into one 14-keypoint pose.
pub fn two_tree_estimate(models: &TwoTreeModel, pyramid: &FeaturePyramid, order: TreeOrder) -> Result<TwoTreePose> {
    let (first_model, second_model, first_keeps_lower) = match order {
        TreeOrder::LowerFirst => (&models.lower, &models.upper, true),
        TreeOrder::UpperFirst => (&models.upper, &models.lower, false),
    };
    let first = infer_max(first_model, pyramid)?;
    let evidence = evidence_from(first_model, &first.pose, second_model, |k| {
        is_lower_body_keypoint(k) == first_keeps_lower
    });
    let second = clamp_inference(second_model, pyramid, &evidence)?;
    let a = keypoints(first_model, pyramid, &first.pose);
    let b = keypoints(second_model, pyramid, &second.pose);
    let keypoints = (0..NUM_KEYPOINTS)
        .map(|k| {
            if is_lower_body_keypoint(k) == first_keeps_lower {
                a[k]
            } else {
                b[k]
            }
        })
        .collect();
    Ok(TwoTreePose {
        keypoints,
        first,
        second,
        order,
    })
}
