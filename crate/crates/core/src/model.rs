//! Model parameters, pose configurations and the pose scoring function.

use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::{CellWindow, FeaturePyramid};
use crate::gdt::EPS_DEF;
use crate::geometry::{bin_angle, Point};
use crate::graph::PartGraph;

/// Mean child-minus-parent offset of an edge for one child type, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeanGeometry {
    Plain { dx: f64, dy: f64 },
    /// Offset of length `r` along the child's orientation.
    Radial { r: f64 },
}

impl MeanGeometry {
    /// `(μx, μy)` for a child at orientation `theta`.
    #[inline]
    pub fn offset(&self, theta: f64) -> (f64, f64) {
        match *self {
            MeanGeometry::Plain { dx, dy } => (dx, dy),
            MeanGeometry::Radial { r } => (r * theta.cos(), r * theta.sin()),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, MeanGeometry::Radial { .. })
    }
}

/// Location of a part for deformation purposes: cell coordinates and
/// orientation in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartLoc {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PartLoc {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        PartLoc { x, y, theta }
    }
}

/// Deformation feature `ψ = [-dx, -dx², -dy, -dy²]` with `dx = x_child - x_parent - μx`
/// (likewise `dy`); radial geometry takes `μ` along the child's orientation and
/// appends `cos(θ_child - θ_parent)`.
pub fn deformation_features(child: PartLoc, parent: PartLoc, mean: &MeanGeometry) -> Vec<f64> {
    let (mx, my) = mean.offset(child.theta);
    let dx = child.x - parent.x - mx;
    let dy = child.y - parent.y - my;
    let mut psi = vec![-dx, -dx * dx, -dy, -dy * dy];
    if mean.is_radial() {
        psi.push((child.theta - parent.theta).cos());
    }
    psi
}

/// Linear template over a `rows x cols` window of feature cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub weights: Vec<f64>,
}

impl Template {
    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        Template {
            rows,
            cols,
            channels,
            weights: vec![0.0; rows * cols * channels],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Window covered when the template is anchored at cell `(y, x)`.
    #[inline]
    pub fn window(&self, y: i32, x: i32) -> CellWindow {
        CellWindow::centered(y, x, self.rows, self.cols)
    }
}

/// Parameters of the edge from a part to its parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Per child type: weights on `ψ`; the fifth entry is used only by radial
    /// geometry. Entries 1 and 3 (quadratic) stay at or above [`EPS_DEF`].
    pub deformation: Vec<[f64; 5]>,
    /// Per child type.
    pub mean: Vec<MeanGeometry>,
    /// `bias[t_child * parent_types + t_parent]`.
    pub bias: Vec<f64>,
    pub parent_types: usize,
}

impl EdgeParams {
    #[inline]
    pub fn bias(&self, t_child: usize, t_parent: usize) -> f64 {
        self.bias[t_child * self.parent_types + t_parent]
    }

    #[inline]
    pub fn bias_mut(&mut self, t_child: usize, t_parent: usize) -> &mut f64 {
        &mut self.bias[t_child * self.parent_types + t_parent]
    }
}

/// All parameters of a mixture-of-parts model. Edge parameters are indexed by
/// child part; the root has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub graph: PartGraph,
    /// `templates[part][type]`.
    pub templates: Vec<Vec<Template>>,
    pub edges: Vec<Option<EdgeParams>>,
    pub rotated: bool,
    pub orientation_count: usize,
    pub cell_size: usize,
    /// Typical torso diameter in cells at the level a person is scored; used to
    /// choose the training level for annotated poses.
    pub torso_cells: f64,
}

impl MixtureModel {
    /// Model with zero templates and biases, unit quadratic deformation weights
    /// and zero mean offsets.
    pub fn zeros(
        graph: PartGraph,
        template_size: (usize, usize),
        channels: usize,
        rotated: bool,
        orientation_count: usize,
    ) -> Self {
        let n = graph.len();
        let mut templates = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            let nt = graph.part(i).num_types;
            templates.push(vec![Template::zeros(template_size.0, template_size.1, channels); nt]);
            edges.push(graph.parent(i).map(|p| {
                let np = graph.part(p).num_types;
                EdgeParams {
                    deformation: vec![[0.0, 1.0, 0.0, 1.0, 0.0]; nt],
                    mean: vec![
                        if rotated {
                            MeanGeometry::Radial { r: 0.0 }
                        } else {
                            MeanGeometry::Plain { dx: 0.0, dy: 0.0 }
                        };
                        nt
                    ],
                    bias: vec![0.0; nt * np],
                    parent_types: np,
                }
            }));
        }
        MixtureModel {
            graph,
            templates,
            edges,
            rotated,
            orientation_count: if rotated { orientation_count.max(1) } else { 1 },
            cell_size: 4,
            torso_cells: 8.0,
        }
    }

    pub fn num_parts(&self) -> usize {
        self.graph.len()
    }

    pub fn num_types(&self, part: usize) -> usize {
        self.graph.part(part).num_types
    }

    /// Number of orientation bins actually searched.
    pub fn orientations(&self) -> usize {
        if self.rotated {
            self.orientation_count
        } else {
            1
        }
    }

    pub fn theta(&self, bin: usize) -> f64 {
        bin_angle(bin, self.orientations())
    }

    pub fn edge(&self, child: usize) -> &EdgeParams {
        self.edges[child].as_ref().expect("non-root part")
    }

    pub fn channels(&self) -> usize {
        self.templates[0][0].channels
    }

    /// Largest template extent in cells.
    pub fn max_template_extent(&self) -> usize {
        self.templates
            .iter()
            .flat_map(|t| t.iter().map(|t| t.rows.max(t.cols)))
            .max()
            .unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.len();
        if self.templates.len() != n || self.edges.len() != n {
            return Err(PoseError::InvalidModel(format!(
                "{} template sets and {} edge sets for {n} parts",
                self.templates.len(),
                self.edges.len()
            )));
        }
        if self.cell_size == 0 {
            return Err(PoseError::InvalidModel("cell size 0".into()));
        }
        if self.rotated && self.orientation_count == 0 {
            return Err(PoseError::InvalidModel("orientation count 0".into()));
        }
        let channels = self.templates[0].first().map(|t| t.channels).unwrap_or(0);
        for i in 0..n {
            let nt = self.graph.part(i).num_types;
            let ts = &self.templates[i];
            if ts.len() != nt {
                return Err(PoseError::InvalidModel(format!(
                    "part {i}: {} templates for {nt} types",
                    ts.len()
                )));
            }
            for t in ts {
                if (t.rows, t.cols) != (ts[0].rows, ts[0].cols) {
                    return Err(PoseError::InvalidModel(format!(
                        "part {i}: template sizes differ across types"
                    )));
                }
                if t.channels != channels || t.weights.len() != t.rows * t.cols * t.channels {
                    return Err(PoseError::InvalidModel(format!("part {i}: malformed template")));
                }
                if t.rows == 0 || t.cols == 0 {
                    return Err(PoseError::InvalidModel(format!("part {i}: empty template")));
                }
                if t.weights.iter().any(|w| !w.is_finite()) {
                    return Err(PoseError::InvalidModel(format!("part {i}: non-finite template")));
                }
            }
            match (self.graph.parent(i), &self.edges[i]) {
                (None, None) => {}
                (Some(p), Some(e)) => {
                    let np = self.graph.part(p).num_types;
                    if e.deformation.len() != nt
                        || e.mean.len() != nt
                        || e.parent_types != np
                        || e.bias.len() != nt * np
                    {
                        return Err(PoseError::InvalidModel(format!(
                            "edge of part {i}: parameter shapes do not match types"
                        )));
                    }
                    for (d, m) in e.deformation.iter().zip(&e.mean) {
                        if d[1].is_nan() || d[3].is_nan() || d[1] < EPS_DEF || d[3] < EPS_DEF {
                            return Err(PoseError::InvalidModel(format!(
                                "edge of part {i}: quadratic weight below {EPS_DEF}"
                            )));
                        }
                        if d.iter().any(|v| !v.is_finite()) {
                            return Err(PoseError::InvalidModel(format!(
                                "edge of part {i}: non-finite deformation"
                            )));
                        }
                        if m.is_radial() != self.rotated {
                            return Err(PoseError::InvalidModel(format!(
                                "edge of part {i}: mean geometry does not match rotated={}",
                                self.rotated
                            )));
                        }
                    }
                    if e.bias.iter().any(|b| !b.is_finite()) {
                        return Err(PoseError::InvalidModel(format!("edge of part {i}: non-finite bias")));
                    }
                }
                _ => {
                    return Err(PoseError::InvalidModel(format!(
                        "part {i}: edge parameters disagree with the graph"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Raises quadratic deformation weights to the floor; returns how many moved.
    pub fn clamp_deformation(&mut self) -> usize {
        let mut moved = 0;
        for e in self.edges.iter_mut().flatten() {
            for d in &mut e.deformation {
                for k in [1, 3] {
                    if !(d[k] >= EPS_DEF) {
                        d[k] = EPS_DEF;
                        moved += 1;
                    }
                }
            }
        }
        moved
    }

    /// Checks the model can score `pyramid`. Plain models read slot 0 of any
    /// pyramid; rotated models need one slot per orientation bin.
    pub fn check_pyramid(&self, pyramid: &FeaturePyramid) -> Result<()> {
        if self.rotated && pyramid.orientation_count != self.orientation_count {
            return Err(PoseError::Incompatible(format!(
                "model searches {} orientations, pyramid has {}",
                self.orientations(),
                pyramid.orientation_count
            )));
        }
        if pyramid.channels() != self.channels() {
            return Err(PoseError::Incompatible(format!(
                "model expects {} channels, pyramid has {}",
                self.channels(),
                pyramid.channels()
            )));
        }
        Ok(())
    }
}

/// Assignment of one part: canonical cell, orientation bin and type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartPlacement {
    pub y: i32,
    pub x: i32,
    pub orientation: usize,
    pub part_type: usize,
}

/// Full pose: one placement per part, all at one pyramid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseConfiguration {
    pub level: usize,
    pub parts: Vec<PartPlacement>,
    pub score: f64,
}

impl PoseConfiguration {
    /// Source-image position of every part.
    pub fn pixel_locations(&self, pyramid: &FeaturePyramid) -> Vec<Point> {
        self.parts
            .iter()
            .map(|p| pyramid.cell_center(self.level, p.y, p.x))
            .collect()
    }

    /// Orientation of every part in radians.
    pub fn thetas(&self, model: &MixtureModel) -> Vec<f64> {
        self.parts.iter().map(|p| model.theta(p.orientation)).collect()
    }
}

/// Orientation slot holding the features for a part at orientation bin `bin`.
#[inline]
pub(crate) fn slot_for(model: &MixtureModel, bin: usize) -> usize {
    if model.rotated {
        bin
    } else {
        0
    }
}

/// Template response of `part` with `part_type` at a placement.
pub fn unary_score(
    model: &MixtureModel,
    pyramid: &FeaturePyramid,
    level: usize,
    part: usize,
    placement: &PartPlacement,
) -> Result<f64> {
    let oob = |detail: String| PoseError::OutOfBounds {
        part,
        name: model.graph.part(part).name.clone(),
        detail,
    };
    let lvl = pyramid
        .levels
        .get(level)
        .ok_or_else(|| oob(format!("level {level} of {}", pyramid.num_levels())))?;
    let p = placement;
    if p.y < 0 || p.x < 0 || p.y as usize >= lvl.rows || p.x as usize >= lvl.cols {
        return Err(oob(format!(
            "cell ({}, {}) outside {}x{} grid",
            p.y, p.x, lvl.rows, lvl.cols
        )));
    }
    if p.orientation >= model.orientations() {
        return Err(oob(format!("orientation bin {} of {}", p.orientation, model.orientations())));
    }
    let ts = &model.templates[part];
    if p.part_type >= ts.len() {
        return Err(oob(format!("type {} of {}", p.part_type, ts.len())));
    }
    let slot = slot_for(model, p.orientation);
    let grid = pyramid.grid(level, slot).map_err(|e| oob(e.to_string()))?;
    let (ay, ax) = lvl.anchor(slot, p.y as usize, p.x as usize);
    let t = &ts[p.part_type];
    let w = t.window(ay, ax);
    if !grid.contains_window(&w) {
        return Err(oob(format!("template window {w:?} leaves the padded grid")));
    }
    Ok(grid.window_dot(&t.weights, &w))
}

/// Deformation plus bias of the edge from `child` to its parent.
pub fn pairwise_score(model: &MixtureModel, child: usize, c: &PartPlacement, p: &PartPlacement) -> f64 {
    let e = model.edge(child);
    let psi = deformation_features(
        PartLoc::new(c.x as f64, c.y as f64, model.theta(c.orientation)),
        PartLoc::new(p.x as f64, p.y as f64, model.theta(p.orientation)),
        &e.mean[c.part_type],
    );
    let w = &e.deformation[c.part_type];
    let mut acc = 0.0;
    for (wk, pk) in w.iter().zip(&psi) {
        acc += wk * pk;
    }
    acc + e.bias(c.part_type, p.part_type)
}

/// Total score of a pose: unary terms summed in part order, then edge terms in
/// edge order.
pub fn score_pose(model: &MixtureModel, pyramid: &FeaturePyramid, pose: &PoseConfiguration) -> Result<f64> {
    if pose.parts.len() != model.num_parts() {
        return Err(PoseError::InvalidArgument(format!(
            "pose has {} parts, model {}",
            pose.parts.len(),
            model.num_parts()
        )));
    }
    let mut total = 0.0;
    for (i, p) in pose.parts.iter().enumerate() {
        total += unary_score(model, pyramid, pose.level, i, p)?;
    }
    for &(child, parent) in model.graph.edges() {
        total += pairwise_score(model, child, &pose.parts[child], &pose.parts[parent]);
    }
    Ok(total)
}
