//! Structured SVM training of mixture models.
//!
//! The score of a pose is linear in the parameters, `score = β·x(I, pose)`. The
//! trainer solves
//!
//! ```text
//! min ½‖β‖² + C Σ_n ξ_n   s.t.  β·x ≥ 1 - ξ_n  (positive image n, its annotated pose)
//!                               β·x ≤ -1 + ξ_n (every pose x of negative image n)
//! ```
//!
//! by coordinate ascent on the dual, one constraint at a time. Constraints of
//! one image share its slack, so their dual variables share the budget
//! `Σ α ≤ C`. Negative constraints are mined with the current model.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::FeaturePyramid;
use crate::gdt::EPS_DEF;
use crate::inference::{detect_all_with, DetectOptions};
use crate::model::{deformation_features, slot_for, MixtureModel, PartLoc, PoseConfiguration};

/// Position of every model parameter in the flat vector `β`: all templates
/// (part-major, then type), then per edge the deformation weights of every
/// child type, then that edge's biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    dim: usize,
    templates: Vec<Vec<usize>>,
    template_len: Vec<usize>,
    deformation: Vec<Option<Vec<usize>>>,
    deformation_len: usize,
    bias: Vec<Option<usize>>,
}

impl ParamLayout {
    pub fn new(model: &MixtureModel) -> Self {
        let n = model.num_parts();
        let mut off = 0;
        let mut templates = Vec::with_capacity(n);
        let mut template_len = Vec::with_capacity(n);
        for ts in &model.templates {
            let len = ts[0].len();
            templates.push(
                (0..ts.len())
                    .map(|_| {
                        let o = off;
                        off += len;
                        o
                    })
                    .collect(),
            );
            template_len.push(len);
        }
        let deformation_len = if model.rotated { 5 } else { 4 };
        let mut deformation = vec![None; n];
        let mut bias = vec![None; n];
        for (i, e) in model.edges.iter().enumerate() {
            if let Some(e) = e {
                let offs = (0..e.deformation.len())
                    .map(|_| {
                        let o = off;
                        off += deformation_len;
                        o
                    })
                    .collect();
                deformation[i] = Some(offs);
                bias[i] = Some(off);
                off += e.bias.len();
            }
        }
        ParamLayout {
            dim: off,
            templates,
            template_len,
            deformation,
            deformation_len,
            bias,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Indices of the quadratic deformation weights.
    pub fn quadratic_indices(&self) -> Vec<usize> {
        self.deformation
            .iter()
            .flatten()
            .flat_map(|offs| offs.iter().flat_map(|&o| [o + 1, o + 3]))
            .collect()
    }

    pub fn pack(&self, model: &MixtureModel) -> Vec<f64> {
        let mut beta = vec![0.0; self.dim];
        for (i, ts) in model.templates.iter().enumerate() {
            for (t, tpl) in ts.iter().enumerate() {
                let o = self.templates[i][t];
                beta[o..o + tpl.len()].copy_from_slice(&tpl.weights);
            }
        }
        for (i, e) in model.edges.iter().enumerate() {
            if let Some(e) = e {
                for (t, d) in e.deformation.iter().enumerate() {
                    let o = self.deformation[i].as_ref().unwrap()[t];
                    beta[o..o + self.deformation_len].copy_from_slice(&d[..self.deformation_len]);
                }
                let o = self.bias[i].unwrap();
                beta[o..o + e.bias.len()].copy_from_slice(&e.bias);
            }
        }
        beta
    }

    /// Writes `beta` into the parameters of `model` (mean geometry untouched).
    pub fn unpack(&self, beta: &[f64], model: &mut MixtureModel) {
        assert_eq!(beta.len(), self.dim, "parameter vector length");
        for (i, ts) in model.templates.iter_mut().enumerate() {
            for (t, tpl) in ts.iter_mut().enumerate() {
                let o = self.templates[i][t];
                let len = tpl.weights.len();
                tpl.weights.copy_from_slice(&beta[o..o + len]);
            }
        }
        for (i, e) in model.edges.iter_mut().enumerate() {
            if let Some(e) = e {
                for (t, d) in e.deformation.iter_mut().enumerate() {
                    let o = self.deformation[i].as_ref().unwrap()[t];
                    d[..self.deformation_len].copy_from_slice(&beta[o..o + self.deformation_len]);
                }
                let o = self.bias[i].unwrap();
                let len = e.bias.len();
                e.bias.copy_from_slice(&beta[o..o + len]);
            }
        }
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(i, v) in &self.entries {
            acc += dense[i as usize] * v;
        }
        acc
    }

    pub fn axpy(&self, a: f64, dense: &mut [f64]) {
        for &(i, v) in &self.entries {
            dense[i as usize] += a * v;
        }
    }

    pub fn norm2(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut d = vec![0.0; dim];
        self.axpy(1.0, &mut d);
        d
    }
}

/// Feature vector `x` with `β·x = score_pose` for the parameters `β` of any
/// model sharing `layout`.
pub fn joint_feature(
    layout: &ParamLayout,
    model: &MixtureModel,
    pyramid: &FeaturePyramid,
    pose: &PoseConfiguration,
) -> Result<SparseVec> {
    if pose.parts.len() != model.num_parts() {
        return Err(PoseError::InvalidArgument("pose and model differ in part count".into()));
    }
    let lvl = pyramid.level(pose.level)?;
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for (i, p) in pose.parts.iter().enumerate() {
        let oob = |detail: String| PoseError::OutOfBounds {
            part: i,
            name: model.graph.part(i).name.clone(),
            detail,
        };
        if p.y < 0 || p.x < 0 || p.y as usize >= lvl.rows || p.x as usize >= lvl.cols {
            return Err(oob(format!("cell ({}, {})", p.y, p.x)));
        }
        if p.orientation >= model.orientations() || p.part_type >= model.num_types(i) {
            return Err(oob(format!("orientation {} type {}", p.orientation, p.part_type)));
        }
        let slot = slot_for(model, p.orientation);
        let (ay, ax) = lvl.anchor(slot, p.y as usize, p.x as usize);
        let w = model.templates[i][p.part_type].window(ay, ax);
        let feats = pyramid
            .grid(pose.level, slot)?
            .window(&w)
            .map_err(|e| oob(e.to_string()))?;
        let o = layout.templates[i][p.part_type];
        debug_assert_eq!(feats.len(), layout.template_len[i]);
        entries.extend(feats.into_iter().enumerate().map(|(k, v)| ((o + k) as u32, v)));
    }
    for (i, offs) in layout.deformation.iter().enumerate() {
        let Some(offs) = offs else { continue };
        let parent = model.graph.parent(i).expect("edge has parent");
        let (c, p) = (&pose.parts[i], &pose.parts[parent]);
        let e = model.edge(i);
        let psi = deformation_features(
            PartLoc::new(c.x as f64, c.y as f64, model.theta(c.orientation)),
            PartLoc::new(p.x as f64, p.y as f64, model.theta(p.orientation)),
            &e.mean[c.part_type],
        );
        let o = offs[c.part_type];
        entries.extend(psi.into_iter().enumerate().map(|(k, v)| ((o + k) as u32, v)));
        let b = layout.bias[i].unwrap() + c.part_type * e.parent_types + p.part_type;
        entries.push((b as u32, 1.0));
    }
    entries.sort_by_key(|e| e.0);
    Ok(SparseVec { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    /// Slack group: constraints of one image share their slack.
    pub group: usize,
    /// `+1` for a positive pose, `-1` for a negative one.
    pub y: f64,
    pub x: SparseVec,
    pub norm2: f64,
    pub alpha: f64,
    /// Consecutive mining rounds this constraint has spent with `α = 0`.
    pub idle: usize,
}

/// Dual coordinate descent state over a cache of constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmState {
    pub c: f64,
    /// `Σ α y x` for the current dual variables.
    pub beta: Vec<f64>,
    /// Lowest-primal parameters met on the current cache. This is what the
    /// trainer uses for mining and returns.
    pub incumbent: Vec<f64>,
    pub constraints: Vec<Constraint>,
    group_alpha: Vec<f64>,
}

/// Objectives after one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Primal objective of the incumbent.
    pub primal: f64,
    /// Dual objective of the current dual variables.
    pub dual: f64,
}

impl SvmState {
    pub fn new(dim: usize, c: f64) -> Self {
        SvmState {
            c,
            beta: vec![0.0; dim],
            incumbent: vec![0.0; dim],
            constraints: Vec::new(),
            group_alpha: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Adds a constraint with `α = 0`; returns its index.
    pub fn add(&mut self, group: usize, y: f64, x: SparseVec) -> usize {
        if self.group_alpha.len() <= group {
            self.group_alpha.resize(group + 1, 0.0);
        }
        let norm2 = x.norm2();
        self.constraints.push(Constraint {
            group,
            y,
            x,
            norm2,
            alpha: 0.0,
            idle: 0,
        });
        self.constraints.len() - 1
    }

    /// `1 - y β·x`, positive when the margin is violated.
    pub fn loss(&self, k: usize) -> f64 {
        let c = &self.constraints[k];
        1.0 - c.y * c.x.dot(&self.beta)
    }

    /// Primal objective of `β` (the dual iterate).
    pub fn primal(&self) -> f64 {
        svm_objective(&self.beta, self.c, &self.constraints)
    }

    pub fn incumbent_primal(&self) -> f64 {
        svm_objective(&self.incumbent, self.c, &self.constraints)
    }

    /// Dual objective `Σ α - ½‖β‖²`.
    pub fn dual(&self) -> f64 {
        self.constraints.iter().map(|c| c.alpha).sum::<f64>() - 0.5 * dot(&self.beta, &self.beta)
    }

    /// `‖β - Σ α y x‖`.
    pub fn consistency_error(&self) -> f64 {
        let mut r = self.beta.clone();
        for c in &self.constraints {
            c.x.axpy(-c.alpha * c.y, &mut r);
        }
        dot(&r, &r).sqrt()
    }

    /// Recomputes `β` and the group budgets from the dual variables.
    pub fn rebuild(&mut self) {
        self.beta.iter_mut().for_each(|b| *b = 0.0);
        self.group_alpha.iter_mut().for_each(|a| *a = 0.0);
        for c in &self.constraints {
            c.x.axpy(c.alpha * c.y, &mut self.beta);
            self.group_alpha[c.group] += c.alpha;
        }
    }

    fn coordinate_pass(&mut self) {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.group_alpha.len()];
        for (k, c) in self.constraints.iter().enumerate() {
            members[c.group].push(k);
        }
        for k in 0..self.constraints.len() {
            let (g, y, norm2, old) = {
                let c = &self.constraints[k];
                (c.group, c.y, c.norm2, c.alpha)
            };
            if norm2 <= 0.0 {
                continue;
            }
            let grad = y * self.constraints[k].x.dot(&self.beta) - 1.0;
            let cap = (self.c - (self.group_alpha[g] - old)).max(0.0);
            let new = (old - grad / norm2).clamp(0.0, cap);
            let delta = new - old;
            if delta != 0.0 {
                self.constraints[k].x.axpy(delta * y, &mut self.beta);
                self.constraints[k].alpha = new;
                self.group_alpha[g] += delta;
            }
            if members[g].len() > 1 && self.group_alpha[g] >= self.c * (1.0 - 1e-12) {
                self.shift_within_group(k, &members[g]);
            }
        }
    }

    /// With the group budget spent, moves dual mass to `k` from the group
    /// member whose margin is least violated.
    fn shift_within_group(&mut self, k: usize, group: &[usize]) {
        let grad = |s: &Self, i: usize| s.constraints[i].y * s.constraints[i].x.dot(&s.beta) - 1.0;
        let gk = grad(self, k);
        let mut donor: Option<(f64, usize)> = None;
        for &j in group {
            if j != k && self.constraints[j].alpha > 0.0 {
                let gj = grad(self, j);
                if donor.map_or(true, |d| gj > d.0) {
                    donor = Some((gj, j));
                }
            }
        }
        let Some((gj, j)) = donor else { return };
        if gj <= gk {
            return;
        }
        let (ck, cj) = (&self.constraints[k], &self.constraints[j]);
        let cross = ck.y * cj.y * sparse_dot(&ck.x, &cj.x);
        let denom = ck.norm2 + cj.norm2 - 2.0 * cross;
        if denom <= 0.0 {
            return;
        }
        let step = ((gj - gk) / denom).clamp(-ck.alpha, cj.alpha);
        if step <= 0.0 {
            return;
        }
        let (yk, yj) = (ck.y, cj.y);
        self.constraints[k].x.clone().axpy(step * yk, &mut self.beta);
        self.constraints[j].x.clone().axpy(-step * yj, &mut self.beta);
        self.constraints[k].alpha += step;
        self.constraints[j].alpha -= step;
        if self.constraints[j].alpha < 0.0 {
            self.constraints[j].alpha = 0.0;
        }
    }

    /// One pass of coordinate ascent over the cache; the incumbent is replaced
    /// when the new dual iterate has a lower primal objective.
    pub fn sweep(&mut self) -> SweepRecord {
        let best = self.incumbent_primal();
        self.coordinate_pass();
        let p = self.primal();
        let primal = if p < best {
            self.incumbent.clone_from(&self.beta);
            p
        } else {
            best
        };
        SweepRecord {
            primal,
            dual: self.dual(),
        }
    }

    /// Runs sweeps until the relative duality gap drops below `tol` or
    /// `max_sweeps` is reached. The incumbent starts as the better of itself
    /// and the dual iterate on the current cache.
    pub fn optimize(&mut self, max_sweeps: usize, tol: f64) -> Result<Vec<SweepRecord>> {
        if self.primal() <= self.incumbent_primal() {
            self.incumbent.clone_from(&self.beta);
        }
        let mut trace = Vec::new();
        for _ in 0..max_sweeps {
            let r = self.sweep();
            if !r.primal.is_finite() || !r.dual.is_finite() {
                return Err(PoseError::NonFiniteObjective(format!(
                    "primal {} dual {} after {} sweeps",
                    r.primal,
                    r.dual,
                    trace.len()
                )));
            }
            trace.push(r);
            if r.primal - r.dual <= tol * r.primal.abs().max(1e-12) {
                break;
            }
        }
        Ok(trace)
    }

    /// Drops constraints idle for more than `max_idle` rounds, then the idle
    /// ones with the smallest loss until at most `cap` remain. Constraints with
    /// `α > 0` are never dropped.
    pub fn evict(&mut self, max_idle: usize, cap: usize) -> usize {
        for c in &mut self.constraints {
            if c.alpha == 0.0 {
                c.idle += 1;
            } else {
                c.idle = 0;
            }
        }
        let before = self.constraints.len();
        self.constraints.retain(|c| c.alpha > 0.0 || c.idle < max_idle);
        if self.constraints.len() > cap {
            let mut idle: Vec<(usize, f64)> = (0..self.constraints.len())
                .filter(|&k| self.constraints[k].alpha == 0.0 && self.constraints[k].y < 0.0)
                .map(|k| (k, self.loss(k)))
                .collect();
            idle.sort_by(|a, b| a.1.total_cmp(&b.1));
            let excess = self.constraints.len() - cap;
            let mut drop: Vec<usize> = idle.into_iter().take(excess).map(|(k, _)| k).collect();
            drop.sort_unstable();
            for k in drop.into_iter().rev() {
                self.constraints.remove(k);
            }
        }
        self.rebuild();
        before - self.constraints.len()
    }
}

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.entries.len() && j < b.entries.len() {
        let (ia, va) = a.entries[i];
        let (ib, vb) = b.entries[j];
        if ia == ib {
            acc += va * vb;
            i += 1;
            j += 1;
        } else if ia < ib {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Primal objective `½‖β‖² + C Σ_groups max(0, worst loss in the group)`.
pub fn svm_objective(beta: &[f64], c: f64, constraints: &[Constraint]) -> f64 {
    let groups = constraints.iter().map(|k| k.group + 1).max().unwrap_or(0);
    let mut worst = vec![0.0f64; groups];
    for k in constraints {
        let l = 1.0 - k.y * k.x.dot(beta);
        worst[k.group] = worst[k.group].max(l);
    }
    0.5 * dot(beta, beta) + c * worst.iter().sum::<f64>()
}

/// Label of a training image.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Positive(PoseConfiguration),
    Negative,
}

#[derive(Debug, Clone)]
pub struct TrainingInstance<'a> {
    pub features: &'a FeaturePyramid,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub c: f64,
    /// Mining rounds.
    pub epochs: usize,
    pub cache_size: usize,
    pub max_sweeps: usize,
    /// Relative duality gap at which a round's optimization stops.
    pub tolerance: f64,
    /// Hard negatives kept per negative image per round.
    pub negatives_per_image: usize,
    /// Rounds a constraint may stay at `α = 0` before eviction.
    pub max_idle: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 0.002,
            epochs: 8,
            cache_size: 20_000,
            max_sweeps: 1000,
            tolerance: 1e-4,
            negatives_per_image: 10,
            max_idle: 3,
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub objective: f64,
    pub cache_size: usize,
    pub new_constraints: usize,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: MixtureModel,
    pub state: SvmState,
    pub log: Vec<LogRow>,
    /// Objectives after every sweep, one list per round.
    pub sweeps: Vec<Vec<SweepRecord>>,
    /// Quadratic weights raised to the floor by the final projection.
    pub clamped: usize,
}

/// Copy of `model` carrying `beta`, with quadratic weights raised to the floor so
/// inference is well posed.
fn inference_model(layout: &ParamLayout, beta: &[f64], template: &MixtureModel) -> MixtureModel {
    let mut m = template.clone();
    layout.unpack(beta, &mut m);
    m.clamp_deformation();
    m
}

/// Trains all parameters except the mean geometry, which `init` must already
/// carry. `on_round` sees the model after every mining round.
pub fn train(
    init: &MixtureModel,
    data: &[TrainingInstance<'_>],
    config: &TrainConfig,
    mut on_round: impl FnMut(usize, &MixtureModel),
) -> Result<TrainResult> {
    init.validate()?;
    if !data.iter().any(|d| matches!(d.label, Label::Positive(_))) {
        return Err(PoseError::InvalidArgument("training needs at least one positive".into()));
    }
    if !(config.c >= 0.0 && config.c.is_finite()) {
        return Err(PoseError::Config(format!("C = {}", config.c)));
    }
    let layout = ParamLayout::new(init);
    let mut state = SvmState::new(layout.dim(), config.c);
    for (g, d) in data.iter().enumerate() {
        if let Label::Positive(pose) = &d.label {
            let x = joint_feature(&layout, init, d.features, pose)?;
            state.add(g, 1.0, x);
        }
    }
    let mut log = Vec::new();
    let mut sweeps = Vec::new();
    for epoch in 0..config.epochs.max(1) {
        let current = inference_model(&layout, &state.incumbent, init);
        let negatives: Vec<(usize, &FeaturePyramid)> = data
            .iter()
            .enumerate()
            .filter(|(_, d)| d.label == Label::Negative)
            .map(|(g, d)| (g, d.features))
            .collect();
        let mined: Vec<Result<Vec<(usize, SparseVec)>>> = negatives
            .par_iter()
            .map(|&(g, pyr)| {
                let opts = DetectOptions {
                    threshold: -1.0 - 1e-9,
                    nms_iou: Some(0.5),
                    max_detections: Some(config.negatives_per_image),
                };
                let mut out = Vec::new();
                for det in detect_all_with(&current, pyr, &opts)? {
                    let x = joint_feature(&layout, init, pyr, &det.pose)?;
                    if x.dot(&state.incumbent) > -1.0 {
                        out.push((g, x));
                    }
                }
                Ok(out)
            })
            .collect();
        let mut added = 0;
        for batch in mined {
            for (g, x) in batch? {
                let dup = state
                    .constraints
                    .iter()
                    .any(|c| c.group == g && c.y < 0.0 && c.x == x);
                if !dup {
                    state.add(g, -1.0, x);
                    added += 1;
                }
            }
        }
        if epoch > 0 && added == 0 {
            info!("epoch {epoch}: no violated negatives, stopping");
            let objective = state.incumbent_primal();
            log.push(LogRow {
                epoch,
                objective,
                cache_size: state.constraints.len(),
                new_constraints: 0,
            });
            break;
        }
        let trace = state.optimize(config.max_sweeps, config.tolerance)?;
        sweeps.push(trace);
        state.evict(config.max_idle, config.cache_size);
        let objective = state.incumbent_primal();
        info!(
            "epoch {epoch}: objective {objective:.6}, cache {}, new {added}",
            state.constraints.len()
        );
        log.push(LogRow {
            epoch,
            objective,
            cache_size: state.constraints.len(),
            new_constraints: added,
        });
        on_round(epoch, &inference_model(&layout, &state.incumbent, init));
    }
    let mut model = init.clone();
    layout.unpack(&state.incumbent, &mut model);
    let clamped = model.clamp_deformation();
    if clamped > 0 {
        warn!("{clamped} quadratic deformation weights raised to {EPS_DEF}");
    }
    Ok(TrainResult {
        model,
        state,
        log,
        sweeps,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: u32, v: f64) -> SparseVec {
        SparseVec { entries: vec![(i, v)] }
    }

    #[test]
    fn separable_toy_reaches_max_margin() {
        let mut s = SvmState::new(2, 1.0);
        s.add(0, 1.0, e(0, 1.0));
        s.add(1, -1.0, e(0, -1.0));
        let trace = s.optimize(100, 1e-12).unwrap();
        assert!(trace.windows(2).all(|w| w[1].primal <= w[0].primal && w[1].dual >= w[0].dual));
        assert!((s.incumbent[0] - 1.0).abs() < 1e-4 && s.incumbent[1].abs() < 1e-12);
        assert!(s.loss(0) <= 1e-9 && s.loss(1) <= 1e-9);
    }

    #[test]
    fn zero_c_gives_zero_beta() {
        let mut s = SvmState::new(3, 0.0);
        s.add(0, 1.0, SparseVec { entries: vec![(0, 1.0), (2, -3.0)] });
        s.add(1, -1.0, e(1, 2.0));
        s.optimize(10, 1e-9).unwrap();
        assert!(s.beta.iter().chain(&s.incumbent).all(|&b| b == 0.0));
    }

    #[test]
    fn objective_examples() {
        let mut s = SvmState::new(2, 0.5);
        s.add(0, 1.0, SparseVec::default());
        assert_eq!(s.primal(), 0.5);
        s.beta = vec![2.0, 0.0];
        s.constraints[0].x = e(0, 1.0);
        assert_eq!(s.primal(), 2.0);
        assert_eq!(svm_objective(&s.beta, 0.5, &s.constraints), 2.0);
    }

    #[test]
    fn group_budget_is_shared() {
        let mut s = SvmState::new(2, 0.3);
        s.add(0, 1.0, e(0, 1.0));
        s.add(1, -1.0, e(1, 1.0));
        s.add(1, -1.0, e(1, 0.5));
        s.optimize(200, 1e-10).unwrap();
        let g1: f64 = s.constraints[1..].iter().map(|c| c.alpha).sum();
        assert!(g1 <= 0.3 + 1e-12);
        assert!(s.constraints.iter().all(|c| c.alpha >= 0.0 && c.alpha <= 0.3 + 1e-12));
        assert!(s.consistency_error() < 1e-9);
    }
}
