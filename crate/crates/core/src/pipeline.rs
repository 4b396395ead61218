//! End-to-end glue: annotated images to trained models to predictions.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PoseError, Result};
use crate::features::{build_pyramid, FeaturePyramid, PyramidConfig, HOG_CHANNELS};
use crate::geometry::{quantize_angle, Point};
use crate::graph::{torso_diameter, AuxOffsets, PartGraph, NUM_KEYPOINTS};
use crate::inference::infer_max;
use crate::io::annotations::PersonRecord;
use crate::io::config::RunConfig;
use crate::learning::{train, Label, TrainResult, TrainingInstance};
use crate::model::{MeanGeometry, MixtureModel, PartPlacement, PoseConfiguration};
use crate::phraselets::{build_book, NodeInstance, PhraseletBook, PhraseletConfig, PhraseletMode};
use crate::raster::Raster;
use crate::two_trees::{two_tree_estimate, TreeOrder, TwoTreeModel};

/// The trained configurations compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Upper-constrained tree, plain part types, upright templates only.
    Mop,
    /// Upper-constrained tree, rotation-normalized types, templates at every orientation.
    RotNorm,
    /// Lower-constrained tree, rotation-normalized types, templates at every orientation.
    RotNormLower,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Mop => "mop",
            Variant::RotNorm => "rotnorm",
            Variant::RotNormLower => "rotnorm-lower",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Variant::Mop, Variant::RotNorm, Variant::RotNormLower]
            .into_iter()
            .find(|v| v.name() == s)
    }

    pub fn graph(self, types: usize) -> PartGraph {
        match self {
            Variant::Mop | Variant::RotNorm => PartGraph::upper_constrained(types),
            Variant::RotNormLower => PartGraph::lower_constrained(types),
        }
    }

    pub fn rotated(self) -> bool {
        self != Variant::Mop
    }

    pub fn phraselet_mode(self) -> PhraseletMode {
        if self.rotated() {
            PhraseletMode::RotationNormalized
        } else {
            PhraseletMode::Plain
        }
    }
}

/// Features of one image.
pub fn features(raster: &Raster, cfg: &PyramidConfig) -> Result<FeaturePyramid> {
    build_pyramid(raster, cfg)
}

/// Torso-normalized node geometry of every person, for clustering.
pub fn node_instances(graph: &PartGraph, people: &[PersonRecord], offsets: &AuxOffsets) -> Result<Vec<NodeInstance>> {
    people
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let kps = r.points();
            let torso = torso_diameter(&kps);
            if !(torso > 0.0) {
                return Err(PoseError::InvalidArgument(format!("{}: zero torso diameter", r.image)));
            }
            let pos = graph.node_positions(&kps, offsets);
            let thetas = graph.node_orientations(&pos);
            Ok(NodeInstance {
                positions: pos.iter().map(|p| p.scale(1.0 / torso)).collect(),
                thetas,
                source: (i, 0),
            })
        })
        .collect()
}

/// Phraselet book of `variant` over the training people.
pub fn cluster_variant(variant: Variant, people: &[PersonRecord], cfg: &RunConfig) -> Result<PhraseletBook> {
    let graph = variant.graph(cfg.phraselets.k);
    let inst = node_instances(&graph, people, &cfg.offsets)?;
    let pc = PhraseletConfig {
        mode: variant.phraselet_mode(),
        ..cfg.phraselets.clone()
    };
    build_book(&graph, &inst, &pc)
}

/// Annotated pose of `person` in model cells: the level whose cells put the
/// torso closest to `model.torso_cells`, nearest cells, quantized orientations.
pub fn positive_pose(
    model: &MixtureModel,
    pyramid: &FeaturePyramid,
    person: &PersonRecord,
    types: &[usize],
    offsets: &AuxOffsets,
) -> Result<PoseConfiguration> {
    let kps = person.points();
    let torso = torso_diameter(&kps);
    let level = pyramid.level_for_cell_px(torso / model.torso_cells);
    let pos = model.graph.node_positions(&kps, offsets);
    let thetas = model.graph.node_orientations(&pos);
    let parts = (0..model.num_parts())
        .map(|i| {
            let (y, x) = pyramid.nearest_cell(level, pos[i]);
            PartPlacement {
                y: y as i32,
                x: x as i32,
                orientation: if model.rotated {
                    quantize_angle(thetas[i], model.orientations())
                } else {
                    0
                },
                part_type: types[i],
            }
        })
        .collect();
    Ok(PoseConfiguration {
        level,
        parts,
        score: 0.0,
    })
}

/// Mean child-from-parent offset per edge and child type, in cells. Rotated
/// models keep the mean length along the child's quantized orientation.
pub fn set_mean_geometry(model: &mut MixtureModel, poses: &[PoseConfiguration]) {
    let n = model.num_parts();
    for i in 0..n {
        let Some(parent) = model.graph.parent(i) else { continue };
        let types = model.num_types(i);
        let mut sums = vec![(0.0, 0.0, 0usize); types];
        let mut all = (0.0, 0.0, 0usize);
        for p in poses {
            let (c, q) = (&p.parts[i], &p.parts[parent]);
            let (dx, dy) = ((c.x - q.x) as f64, (c.y - q.y) as f64);
            let (a, b) = if model.rotated {
                let t = model.theta(c.orientation);
                (dx * t.cos() + dy * t.sin(), 0.0)
            } else {
                (dx, dy)
            };
            let s = &mut sums[c.part_type];
            s.0 += a;
            s.1 += b;
            s.2 += 1;
            all.0 += a;
            all.1 += b;
            all.2 += 1;
        }
        let rotated = model.rotated;
        let edge = model.edges[i].as_mut().expect("non-root part has an edge");
        for (t, s) in sums.iter().enumerate() {
            let (a, b, k) = if s.2 > 0 { *s } else { all };
            let k = k.max(1) as f64;
            edge.mean[t] = if rotated {
                MeanGeometry::Radial { r: a / k }
            } else {
                MeanGeometry::Plain { dx: a / k, dy: b / k }
            };
        }
    }
}

/// Untrained model of `variant` with its mean geometry set from the positives.
pub fn initial_model(
    variant: Variant,
    cfg: &RunConfig,
    book: &PhraseletBook,
    positives: &[(&FeaturePyramid, &PersonRecord)],
) -> Result<(MixtureModel, Vec<PoseConfiguration>)> {
    let k = cfg.phraselets.k;
    let orientations = if variant.rotated() {
        cfg.pyramid.orientation_count
    } else {
        1
    };
    let mut model = MixtureModel::zeros(variant.graph(k), cfg.model.template, HOG_CHANNELS, variant.rotated(), orientations);
    model.cell_size = cfg.pyramid.cell_size;
    model.torso_cells = cfg.model.torso_cells;
    let poses = positives
        .iter()
        .enumerate()
        .map(|(s, (pyr, person))| {
            let types: Vec<usize> = book.parts.iter().map(|p| p.labels[s].unwrap_or(0)).collect();
            positive_pose(&model, pyr, person, &types, &cfg.offsets)
        })
        .collect::<Result<Vec<_>>>()?;
    set_mean_geometry(&mut model, &poses);
    Ok((model, poses))
}

#[derive(Debug, Clone)]
pub struct TrainedVariant {
    pub variant: Variant,
    pub book: PhraseletBook,
    pub result: TrainResult,
}

/// Clusters, initializes and trains one variant. `positives[s]` must be the
/// person of `people[s]`.
pub fn train_variant(
    variant: Variant,
    cfg: &RunConfig,
    positives: &[(&FeaturePyramid, &PersonRecord)],
    negatives: &[&FeaturePyramid],
    on_round: impl FnMut(usize, &MixtureModel),
) -> Result<TrainedVariant> {
    let people: Vec<PersonRecord> = positives.iter().map(|(_, p)| (*p).clone()).collect();
    let book = cluster_variant(variant, &people, cfg)?;
    let (model, poses) = initial_model(variant, cfg, &book, positives)?;
    let mut data: Vec<TrainingInstance<'_>> = positives
        .iter()
        .zip(poses)
        .map(|((pyr, _), pose)| TrainingInstance {
            features: pyr,
            label: Label::Positive(pose),
        })
        .collect();
    data.extend(negatives.iter().map(|pyr| TrainingInstance {
        features: pyr,
        label: Label::Negative,
    }));
    info!(
        "training {}: {} positives, {} negatives",
        variant.name(),
        positives.len(),
        negatives.len()
    );
    let result = train(&model, &data, &cfg.train, on_round)?;
    Ok(TrainedVariant { variant, book, result })
}

/// How predictions are made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferMode {
    Upper,
    Lower,
    TwoTrees,
    /// Upper tree first, the reverse of two-trees.
    TwoTreesReversed,
}

impl InferMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "upper" => Some(InferMode::Upper),
            "lower" => Some(InferMode::Lower),
            "two-trees" => Some(InferMode::TwoTrees),
            "two-trees-reversed" => Some(InferMode::TwoTreesReversed),
            _ => None,
        }
    }
}

/// `base` with the cell size and orientation bins `model` was trained with.
pub fn model_pyramid(model: &MixtureModel, base: &PyramidConfig) -> PyramidConfig {
    PyramidConfig {
        cell_size: model.cell_size,
        orientation_count: model.orientations(),
        ..base.clone()
    }
}

/// Fourteen keypoints, in pixels, of the best pose of a single model.
pub fn predict_single(model: &MixtureModel, pyramid: &FeaturePyramid) -> Result<(Vec<Point>, f64)> {
    let det = infer_max(model, pyramid)?;
    let kps = model.graph.keypoints_from_nodes(&det.pose.pixel_locations(pyramid));
    debug_assert_eq!(kps.len(), NUM_KEYPOINTS);
    Ok((kps, det.score))
}

pub fn predict_two_trees(models: &TwoTreeModel, pyramid: &FeaturePyramid, order: TreeOrder) -> Result<(Vec<Point>, f64)> {
    let out = two_tree_estimate(models, pyramid, order)?;
    Ok((out.keypoints, out.second.score))
}

/// Features of many images, in parallel.
pub fn all_features(rasters: &[Raster], cfg: &PyramidConfig) -> Result<Vec<FeaturePyramid>> {
    rasters.par_iter().map(|r| features(r, cfg)).collect()
}
