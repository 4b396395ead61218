//! Exact max-product inference over a part tree.
//!
//! Per pyramid level, each part's score over `(orientation, type, cell)` is its
//! template response plus the messages of its children. The message to the
//! parent is computed in three steps: a distance transform per child
//! `(type, orientation)` slice, a maximization over child orientations (the
//! `cos(dθ)` term is not separable), and a maximization over child types with
//! the pairwise bias. Every maximization scans candidates in ascending order and
//! only replaces on a strictly greater value, so ties go to the smallest index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::FeaturePyramid;
use crate::gdt::{self, AxisPenalty, Scratch};
use crate::model::{score_pose, slot_for, MixtureModel, PartPlacement, PoseConfiguration};

/// Scores of one part over `(orientation, type, y, x)` at one level; `-inf`
/// marks placements that are not allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub part: usize,
    pub level: usize,
    pub rows: usize,
    pub cols: usize,
    pub types: usize,
    pub orientations: usize,
    pub values: Vec<f64>,
}

impl ScoreMap {
    fn filled(part: usize, level: usize, rows: usize, cols: usize, types: usize, orientations: usize, v: f64) -> Self {
        ScoreMap {
            part,
            level,
            rows,
            cols,
            types,
            orientations,
            values: vec![v; orientations * types * rows * cols],
        }
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn get(&self, orientation: usize, t: usize, y: usize, x: usize) -> f64 {
        self.values[((orientation * self.types + t) * self.rows + y) * self.cols + x]
    }

    /// Row-major `rows x cols` slice of one `(orientation, type)` pair.
    #[inline]
    pub fn slice(&self, orientation: usize, t: usize) -> &[f64] {
        let n = self.cells();
        let s = (orientation * self.types + t) * n;
        &self.values[s..s + n]
    }

    #[inline]
    fn slice_mut(&mut self, orientation: usize, t: usize) -> &mut [f64] {
        let n = self.cells();
        let s = (orientation * self.types + t) * n;
        &mut self.values[s..s + n]
    }
}

/// A detected pose and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub pose: PoseConfiguration,
    pub score: f64,
}

/// Restriction of one part to a single cell (and optionally one orientation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellClamp {
    pub y: i32,
    pub x: i32,
    pub orientation: Option<usize>,
}

/// Template responses of `part` at every placement of `level`. With a clamp,
/// everything but the clamped cell (and orientation) is `-inf`.
pub(crate) fn unary_map_clamped(
    model: &MixtureModel,
    pyramid: &FeaturePyramid,
    level: usize,
    part: usize,
    clamp: Option<&CellClamp>,
) -> Result<ScoreMap> {
    let lvl = pyramid.level(level)?;
    let (rows, cols) = (lvl.rows, lvl.cols);
    let k = model.orientations();
    let ts = &model.templates[part];
    let mut map = ScoreMap::filled(part, level, rows, cols, ts.len(), k, f64::NEG_INFINITY);
    for o in 0..k {
        if let Some(c) = clamp {
            if c.orientation.is_some_and(|co| co != o) {
                continue;
            }
        }
        let slot = slot_for(model, o);
        let grid = pyramid.grid(level, slot)?;
        for (t, tpl) in ts.iter().enumerate() {
            let out = map.slice_mut(o, t);
            if let Some(c) = clamp {
                if c.y < 0 || c.x < 0 || c.y as usize >= rows || c.x as usize >= cols {
                    continue;
                }
                let (ay, ax) = lvl.anchor(slot, c.y as usize, c.x as usize);
                let w = tpl.window(ay, ax);
                if grid.contains_window(&w) {
                    out[c.y as usize * cols + c.x as usize] = grid.window_dot(&tpl.weights, &w);
                }
                continue;
            }
            for y in 0..rows {
                let mut x = 0;
                while x < cols {
                    if x + 4 <= cols {
                        let ws = [0, 1, 2, 3].map(|d| {
                            let (ay, ax) = lvl.anchor(slot, y, x + d);
                            tpl.window(ay, ax)
                        });
                        if ws.iter().all(|w| grid.contains_window(w)) {
                            let v = grid.window_dot4(&tpl.weights, &ws);
                            out[y * cols + x..y * cols + x + 4].copy_from_slice(&v);
                            x += 4;
                            continue;
                        }
                    }
                    let (ay, ax) = lvl.anchor(slot, y, x);
                    let w = tpl.window(ay, ax);
                    if grid.contains_window(&w) {
                        out[y * cols + x] = grid.window_dot(&tpl.weights, &w);
                    }
                    x += 1;
                }
            }
        }
    }
    Ok(map)
}

/// Template responses of `part` at every placement of `level`.
pub fn unary_map(model: &MixtureModel, pyramid: &FeaturePyramid, level: usize, part: usize) -> Result<ScoreMap> {
    unary_map_clamped(model, pyramid, level, part, None)
}

/// Backpointers of the edge from a child to its parent.
#[derive(Debug, Clone)]
struct EdgeBack {
    child_types: usize,
    parent_types: usize,
    orientations: usize,
    cells: usize,
    /// `[θ_parent][t_parent][cell]` -> child type.
    arg_type: Vec<u16>,
    /// `[t_child][θ_parent][cell]` -> child orientation.
    arg_theta: Vec<u16>,
    /// `[t_child][θ_child][cell]` -> child cell.
    arg_pos: Vec<u32>,
}

impl EdgeBack {
    /// Child placement given the parent's `(θ, type, cell)`.
    fn child(&self, theta_p: usize, t_p: usize, cell_p: usize) -> (usize, usize, usize) {
        let n = self.cells;
        let t_c = self.arg_type[(theta_p * self.parent_types + t_p) * n + cell_p] as usize;
        let theta_c = self.arg_theta[(t_c * self.orientations + theta_p) * n + cell_p] as usize;
        let cell_c = self.arg_pos[(t_c * self.orientations + theta_c) * n + cell_p] as usize;
        (theta_c, t_c, cell_c)
    }
}

/// DP state of one level: the root's total scores and every edge's backpointers.
struct LevelDp {
    level: usize,
    root: ScoreMap,
    back: Vec<Option<EdgeBack>>,
}

/// Computes the message from `child` (with total scores `s`) to its parent.
fn message(model: &MixtureModel, child: usize, s: &ScoreMap, scratch: &mut Scratch) -> (ScoreMap, EdgeBack) {
    let parent = model.graph.parent(child).expect("child has a parent");
    let e = model.edge(child);
    let (tc, tp) = (s.types, model.num_types(parent));
    let k = s.orientations;
    let (rows, cols) = (s.rows, s.cols);
    let n = rows * cols;

    // distance transform per (child type, child orientation)
    let mut d = vec![0.0; tc * k * n];
    let mut arg_pos = vec![0u32; tc * k * n];
    for t in 0..tc {
        let w = e.deformation[t];
        for o in 0..k {
            let (mx, my) = e.mean[t].offset(model.theta(o));
            let px = AxisPenalty::new(w[0], w[1], mx);
            let py = AxisPenalty::new(w[2], w[3], my);
            let off = (t * k + o) * n;
            gdt::transform_2d(
                s.slice(o, t),
                rows,
                cols,
                (px.a, px.b),
                (py.a, py.b),
                &mut d[off..off + n],
                &mut arg_pos[off..off + n],
                scratch,
            );
            let c = px.c + py.c;
            for v in &mut d[off..off + n] {
                *v += c;
            }
        }
    }

    // best child orientation per (child type, parent orientation)
    let mut best = vec![f64::NEG_INFINITY; tc * k * n];
    let mut arg_theta = vec![0u16; tc * k * n];
    for t in 0..tc {
        let w5 = if model.rotated { e.deformation[t][4] } else { 0.0 };
        for op in 0..k {
            let off = (t * k + op) * n;
            let (bv, ba) = (&mut best[off..off + n], &mut arg_theta[off..off + n]);
            for oc in 0..k {
                let add = if model.rotated {
                    w5 * (model.theta(oc) - model.theta(op)).cos()
                } else {
                    0.0
                };
                let src = &d[(t * k + oc) * n..(t * k + oc + 1) * n];
                for c in 0..n {
                    let v = src[c] + add;
                    if v > bv[c] {
                        bv[c] = v;
                        ba[c] = oc as u16;
                    }
                }
            }
        }
    }

    // best child type per (parent orientation, parent type)
    let mut msg = ScoreMap::filled(parent, s.level, rows, cols, tp, k, f64::NEG_INFINITY);
    let mut arg_type = vec![0u16; k * tp * n];
    for op in 0..k {
        for t_p in 0..tp {
            let off = (op * tp + t_p) * n;
            let out = &mut msg.values[off..off + n];
            let at = &mut arg_type[off..off + n];
            for t_c in 0..tc {
                let b = e.bias(t_c, t_p);
                let src = &best[(t_c * k + op) * n..(t_c * k + op + 1) * n];
                for c in 0..n {
                    let v = src[c] + b;
                    if v > out[c] {
                        out[c] = v;
                        at[c] = t_c as u16;
                    }
                }
            }
        }
    }
    (
        msg,
        EdgeBack {
            child_types: tc,
            parent_types: tp,
            orientations: k,
            cells: n,
            arg_type,
            arg_theta,
            arg_pos,
        },
    )
}

fn run_level(
    model: &MixtureModel,
    pyramid: &FeaturePyramid,
    level: usize,
    clamps: &[Option<CellClamp>],
) -> Result<LevelDp> {
    let g = &model.graph;
    let n_parts = g.len();
    let unaries: Vec<ScoreMap> = (0..n_parts)
        .into_par_iter()
        .map(|i| unary_map_clamped(model, pyramid, level, i, clamps.get(i).and_then(|c| c.as_ref())))
        .collect::<Result<_>>()?;
    let mut totals: Vec<Option<ScoreMap>> = unaries.into_iter().map(Some).collect();
    let mut back: Vec<Option<EdgeBack>> = (0..n_parts).map(|_| None).collect();
    let mut scratch = Scratch::default();
    // children before parents
    for &i in g.order().iter().rev() {
        let Some(p) = g.parent(i) else { continue };
        let s = totals[i].take().expect("child scored once");
        let (msg, eb) = message(model, i, &s, &mut scratch);
        let parent_total = totals[p].as_mut().expect("parent pending");
        for (a, b) in parent_total.values.iter_mut().zip(&msg.values) {
            *a += b;
        }
        back[i] = Some(eb);
    }
    let root = totals[g.root()].take().expect("root total");
    Ok(LevelDp { level, root, back })
}

impl LevelDp {
    /// Best root `(θ, type)` at a cell, or `None` if every state is `-inf`.
    fn best_at(&self, cell: usize) -> Option<(usize, usize, f64)> {
        let r = &self.root;
        let mut best: Option<(usize, usize, f64)> = None;
        for o in 0..r.orientations {
            for t in 0..r.types {
                let v = r.slice(o, t)[cell];
                if v > best.map_or(f64::NEG_INFINITY, |b| b.2) {
                    best = Some((o, t, v));
                }
            }
        }
        best
    }

    fn backtrack(&self, model: &MixtureModel, theta: usize, t: usize, cell: usize) -> PoseConfiguration {
        let g = &model.graph;
        let cols = self.root.cols;
        let mut state = vec![(0usize, 0usize, 0usize); g.len()];
        state[g.root()] = (theta, t, cell);
        for &i in g.order() {
            if let Some(p) = g.parent(i) {
                let (op, tp, cp) = state[p];
                let eb = self.back[i].as_ref().expect("edge backpointers");
                debug_assert_eq!(eb.child_types, model.num_types(i));
                state[i] = eb.child(op, tp, cp);
            }
        }
        PoseConfiguration {
            level: self.level,
            parts: state
                .into_iter()
                .map(|(o, t, c)| PartPlacement {
                    y: (c / cols) as i32,
                    x: (c % cols) as i32,
                    orientation: o,
                    part_type: t,
                })
                .collect(),
            score: f64::NEG_INFINITY,
        }
    }
}

/// Clamps for the DP, indexed by part, plus the levels to search.
#[derive(Debug, Clone, Default)]
pub(crate) struct Restriction {
    pub clamps: Vec<Option<CellClamp>>,
    pub level: Option<usize>,
}

fn levels_for(pyramid: &FeaturePyramid, r: &Restriction) -> Result<Vec<usize>> {
    match r.level {
        Some(l) if l < pyramid.num_levels() => Ok(vec![l]),
        Some(l) => Err(PoseError::OutOfBounds {
            part: r.clamps.iter().position(|c| c.is_some()).unwrap_or(0),
            name: String::from("evidence"),
            detail: format!("level {l} of {}", pyramid.num_levels()),
        }),
        None => Ok((0..pyramid.num_levels()).collect()),
    }
}

fn run_levels(model: &MixtureModel, pyramid: &FeaturePyramid, r: &Restriction) -> Result<Vec<LevelDp>> {
    model.check_pyramid(pyramid)?;
    let levels = levels_for(pyramid, r)?;
    levels
        .into_par_iter()
        .map(|l| run_level(model, pyramid, l, &r.clamps))
        .collect()
}

pub(crate) fn infer_restricted(model: &MixtureModel, pyramid: &FeaturePyramid, r: &Restriction) -> Result<Detection> {
    let dps = run_levels(model, pyramid, r)?;
    let mut best: Option<(usize, usize, usize, usize, f64)> = None;
    for (li, dp) in dps.iter().enumerate() {
        let root = &dp.root;
        for o in 0..root.orientations {
            for t in 0..root.types {
                let sl = root.slice(o, t);
                for (c, &v) in sl.iter().enumerate() {
                    if v > best.map_or(f64::NEG_INFINITY, |b| b.4) {
                        best = Some((li, o, t, c, v));
                    }
                }
            }
        }
    }
    let (li, o, t, c, _) = best.ok_or(PoseError::NoValidPlacement)?;
    let mut pose = dps[li].backtrack(model, o, t, c);
    let score = score_pose(model, pyramid, &pose)?;
    pose.score = score;
    Ok(Detection { pose, score })
}

/// Highest-scoring pose over all levels, orientations, types and placements.
/// Ties go to the smallest `(level, θ, type, y, x)` of the root.
pub fn infer_max(model: &MixtureModel, pyramid: &FeaturePyramid) -> Result<Detection> {
    infer_restricted(model, pyramid, &Restriction::default())
}

/// Options for [`detect_all_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub threshold: f64,
    /// Suppress a detection overlapping a better one with IoU above this; `None`
    /// disables suppression.
    pub nms_iou: Option<f64>,
    /// Keep at most this many detections after suppression.
    pub max_detections: Option<usize>,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            threshold: 0.0,
            nms_iou: Some(0.5),
            max_detections: None,
        }
    }
}

/// Axis-aligned box `(x0, y0, x1, y1)` around all part windows, in source pixels.
pub fn pose_box(model: &MixtureModel, pyramid: &FeaturePyramid, pose: &PoseConfiguration) -> [f64; 4] {
    let lvl = &pyramid.levels[pose.level];
    let cs = pyramid.cell_size as f64;
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for (i, p) in pose.parts.iter().enumerate() {
        let c = pyramid.cell_center(pose.level, p.y, p.x);
        let t = &model.templates[i][p.part_type];
        let hw = 0.5 * t.cols as f64 * cs * lvl.scale_x;
        let hh = 0.5 * t.rows as f64 * cs * lvl.scale_y;
        b[0] = b[0].min(c.x - hw);
        b[1] = b[1].min(c.y - hh);
        b[2] = b[2].max(c.x + hw);
        b[3] = b[3].max(c.y + hh);
    }
    b
}

pub fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Every root placement whose backtracked pose scores at least `threshold`,
/// greedily suppressed at IoU 0.5 and sorted by descending score.
pub fn detect_all(model: &MixtureModel, pyramid: &FeaturePyramid, threshold: f64) -> Result<Vec<Detection>> {
    detect_all_with(
        model,
        pyramid,
        &DetectOptions {
            threshold,
            ..Default::default()
        },
    )
}

pub fn detect_all_with(model: &MixtureModel, pyramid: &FeaturePyramid, opts: &DetectOptions) -> Result<Vec<Detection>> {
    if opts.threshold == f64::INFINITY {
        model.check_pyramid(pyramid)?;
        return Ok(Vec::new());
    }
    let dps = run_levels(model, pyramid, &Restriction::default())?;
    let mut cands = Vec::new();
    for dp in &dps {
        for cell in 0..dp.root.cells() {
            let Some((o, t, _)) = dp.best_at(cell) else { continue };
            let mut pose = dp.backtrack(model, o, t, cell);
            let score = score_pose(model, pyramid, &pose)?;
            if score >= opts.threshold {
                pose.score = score;
                cands.push(Detection { pose, score });
            }
        }
    }
    // stable: equal scores keep (level, y, x) order
    cands.sort_by(|a, b| b.score.total_cmp(&a.score));
    let Some(iou) = opts.nms_iou else {
        if let Some(m) = opts.max_detections {
            cands.truncate(m);
        }
        return Ok(cands);
    };
    let mut kept: Vec<(Detection, [f64; 4])> = Vec::new();
    for d in cands {
        let b = pose_box(model, pyramid, &d.pose);
        if kept.iter().all(|(_, kb)| box_iou(&b, kb) <= iou) {
            kept.push((d, b));
            if opts.max_detections.is_some_and(|m| kept.len() >= m) {
                break;
            }
        }
    }
    Ok(kept.into_iter().map(|(d, _)| d).collect())
}
