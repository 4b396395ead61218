//! Shared fixtures and slow reference implementations for the integration tests.
#![allow(dead_code)]

pub mod ssvm;

use posekit::features::{lookup, FeatureGrid, FeaturePyramid};
use posekit::graph::PartGraph;
use posekit::model::{MeanGeometry, MixtureModel, PartPlacement, PoseConfiguration};
use rand::Rng;

pub fn random_grid<R: Rng>(rng: &mut R, rows: usize, cols: usize, channels: usize, pad: usize) -> FeatureGrid {
    let cells: Vec<f64> = (0..rows * cols * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureGrid::from_cells(rows, cols, channels, &cells, pad).unwrap()
}

/// One level, `orientations` independent random slots.
pub fn random_pyramid<R: Rng>(rng: &mut R, rows: usize, cols: usize, channels: usize, orientations: usize) -> FeaturePyramid {
    let slots = (0..orientations).map(|_| random_grid(rng, rows, cols, channels, 2)).collect();
    FeaturePyramid::from_grids(vec![slots]).unwrap()
}

pub fn randomize<R: Rng>(rng: &mut R, m: &mut MixtureModel) {
    let rotated = m.rotated;
    for ts in &mut m.templates {
        for t in ts {
            t.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        }
    }
    for e in m.edges.iter_mut().flatten() {
        for d in &mut e.deformation {
            *d = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.01..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.01..1.0),
                rng.gen_range(-1.0..1.0),
            ];
        }
        for mu in &mut e.mean {
            *mu = if rotated {
                MeanGeometry::Radial { r: rng.gen_range(-2.0..2.0) }
            } else {
                MeanGeometry::Plain {
                    dx: rng.gen_range(-2.0..2.0),
                    dy: rng.gen_range(-2.0..2.0),
                }
            };
        }
        e.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
    }
}

pub fn random_chain_model<R: Rng>(
    rng: &mut R,
    parts: usize,
    types: usize,
    channels: usize,
    orientations: usize,
    template: (usize, usize),
) -> MixtureModel {
    let g = PartGraph::chain(parts, types).unwrap();
    let rotated = orientations > 1;
    let mut m = MixtureModel::zeros(g, template, channels, rotated, orientations);
    randomize(rng, &mut m);
    m
}

/// Exhaustive maximization over every joint placement of every part at one
/// level. Each part may be restricted to a single `(y, x)` and optionally one
/// orientation. Configurations are visited in lexicographic order of
/// `(part 0 state, part 1 state, ...)` with state `(θ, type, y, x)`, keeping the
/// first strict maximum.
pub fn brute_force(
    model: &MixtureModel,
    pyr: &FeaturePyramid,
    level: usize,
    clamps: &[Option<(i32, i32, Option<usize>)>],
) -> Option<(f64, PoseConfiguration)> {
    let n = model.num_parts();
    let lvl = &pyr.levels[level];
    let k = model.orientations();
    // candidate states and their template responses, computed by gather + dot
    let mut states: Vec<Vec<(PartPlacement, f64)>> = Vec::new();
    for i in 0..n {
        let mut v = Vec::new();
        for o in 0..k {
            for t in 0..model.num_types(i) {
                for y in 0..lvl.rows as i32 {
                    for x in 0..lvl.cols as i32 {
                        if let Some(Some((cy, cx, co))) = clamps.get(i) {
                            if (y, x) != (*cy, *cx) || co.is_some_and(|c| c != o) {
                                continue;
                            }
                        }
                        let slot = if model.rotated { o } else { 0 };
                        let (ay, ax) = lvl.anchor(slot, y as usize, x as usize);
                        let tpl = &model.templates[i][t];
                        let win = tpl.window(ay, ax);
                        let feats = lookup(pyr, level, slot, &win).unwrap();
                        let u: f64 = tpl.weights.iter().zip(&feats).map(|(a, b)| a * b).sum();
                        v.push((PartPlacement { y, x, orientation: o, part_type: t }, u));
                    }
                }
            }
        }
        if v.is_empty() {
            return None;
        }
        states.push(v);
    }
    let theta = |o: usize| model.theta(o);
    // pairwise tables per edge: [child state][parent state]
    let edges = model.graph.edges().to_vec();
    let tables: Vec<Vec<f64>> = edges
        .iter()
        .map(|&(c, p)| {
            let e = model.edge(c);
            let mut tab = Vec::with_capacity(states[c].len() * states[p].len());
            for (cs, _) in &states[c] {
                for (ps, _) in &states[p] {
                    let (mx, my) = match e.mean[cs.part_type] {
                        MeanGeometry::Plain { dx, dy } => (dx, dy),
                        MeanGeometry::Radial { r } => {
                            (r * theta(cs.orientation).cos(), r * theta(cs.orientation).sin())
                        }
                    };
                    let dx = cs.x as f64 - ps.x as f64 - mx;
                    let dy = cs.y as f64 - ps.y as f64 - my;
                    let w = e.deformation[cs.part_type];
                    let mut psi = vec![-dx, -dx * dx, -dy, -dy * dy];
                    if model.rotated {
                        psi.push((theta(cs.orientation) - theta(ps.orientation)).cos());
                    }
                    let mut acc = 0.0;
                    for (a, b) in w.iter().zip(&psi) {
                        acc += a * b;
                    }
                    tab.push(acc + e.bias(cs.part_type, ps.part_type));
                }
            }
            tab
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut total = 0.0;
        for i in 0..n {
            total += states[i][idx[i]].1;
        }
        for (e, &(c, p)) in edges.iter().enumerate() {
            total += tables[e][idx[c] * states[p].len() + idx[p]];
        }
        if best.as_ref().map_or(true, |b| total > b.0) {
            best = Some((total, idx.clone()));
        }
        // odometer, last part fastest
        let mut d = n;
        loop {
            if d == 0 {
                let (s, ix) = best.unwrap();
                let parts = ix.iter().enumerate().map(|(i, &j)| states[i][j].0).collect();
                return Some((s, PoseConfiguration { level, parts, score: s }));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < states[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// `max_q f[q] - a(p-q)^2 - b(p-q)` by direct double loop.
pub fn naive_gdt_1d(f: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<usize>) {
    let n = f.len();
    let mut out = vec![f64::NEG_INFINITY; n];
    let mut arg: Vec<usize> = (0..n).collect();
    for p in 0..n {
        for q in 0..n {
            let d = p as f64 - q as f64;
            let v = f[q] - a * d * d - b * d;
            if v > out[p] {
                out[p] = v;
                arg[p] = q;
            }
        }
    }
    (out, arg)
}

/// Direct maximization over every source cell for every target cell.
pub fn naive_gdt_2d(
    f: &[f64],
    rows: usize,
    cols: usize,
    wx2: f64,
    wx1: f64,
    wy2: f64,
    wy1: f64,
) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; rows * cols];
    for y in 0..rows {
        for x in 0..cols {
            for qy in 0..rows {
                for qx in 0..cols {
                    let dx = x as f64 - qx as f64;
                    let dy = y as f64 - qy as f64;
                    let v = f[qy * cols + qx] - wx2 * dx * dx - wx1 * dx - wy2 * dy * dy - wy1 * dy;
                    out[y * cols + x] = out[y * cols + x].max(v);
                }
            }
        }
    }
    out
}
