//! The small structured training problem and a slow primal reference solver.

use posekit::features::{FeatureGrid, FeaturePyramid};
use posekit::graph::PartGraph;
use posekit::learning::{Constraint, Label, TrainingInstance};
use posekit::model::{MeanGeometry, MixtureModel, PartPlacement, PoseConfiguration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Toy {
    pub model: MixtureModel,
    pub pyramids: Vec<FeaturePyramid>,
    pub poses: Vec<Option<PoseConfiguration>>,
}

/// Ten positives with a planted pattern at the annotated pose, five negatives.
pub fn toy_problem(seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = MixtureModel::zeros(PartGraph::chain(2, 2).unwrap(), (2, 2), 4, false, 1);
    for mu in &mut model.edges[1].as_mut().unwrap().mean {
        *mu = MeanGeometry::Plain { dx: 0.0, dy: 2.0 };
    }
    let mut pyramids = Vec::new();
    let mut poses = Vec::new();
    for n in 0..15 {
        let mut cells: Vec<f64> = (0..7 * 7 * 4).map(|_| rng.gen_range(0.0..0.5)).collect();
        let pose = if n < 10 {
            let (y, x) = (rng.gen_range(0..4), rng.gen_range(1..6));
            for (py, px) in [(y, x), (y + 2, x)] {
                cells[(py * 7 + px) * 4] += 1.0;
            }
            let t = n % 2;
            Some(PoseConfiguration {
                level: 0,
                parts: vec![
                    PartPlacement { y: y as i32, x: x as i32, orientation: 0, part_type: t },
                    PartPlacement { y: y as i32 + 2, x: x as i32, orientation: 0, part_type: t },
                ],
                score: 0.0,
            })
        } else {
            None
        };
        let grid = FeatureGrid::from_cells(7, 7, 4, &cells, 2).unwrap();
        pyramids.push(FeaturePyramid::from_grids(vec![vec![grid]]).unwrap());
        poses.push(pose);
    }
    Toy { model, pyramids, poses }
}

pub fn instances(toy: &Toy) -> Vec<TrainingInstance<'_>> {
    toy.pyramids
        .iter()
        .zip(&toy.poses)
        .map(|(p, pose)| TrainingInstance {
            features: p,
            label: match pose {
                Some(pose) => Label::Positive(pose.clone()),
                None => Label::Negative,
            },
        })
        .collect()
}

/// Projected subgradient descent on the primal over a fixed constraint set;
/// returns the best objective seen.
pub fn subgradient_reference(c: f64, dim: usize, cons: &[Constraint], iters: usize) -> f64 {
    let groups = cons.iter().map(|k| k.group + 1).max().unwrap();
    let objective = |beta: &[f64]| {
        let mut worst = vec![0.0f64; groups];
        for k in cons {
            let l = 1.0 - k.y * k.x.dot(beta);
            worst[k.group] = worst[k.group].max(l);
        }
        0.5 * beta.iter().map(|b| b * b).sum::<f64>() + c * worst.iter().sum::<f64>()
    };
    let mut beta = vec![0.0; dim];
    let mut best = objective(&beta);
    for t in 0..iters {
        let mut worst: Vec<Option<(f64, usize)>> = vec![None; groups];
        for (i, k) in cons.iter().enumerate() {
            let l = 1.0 - k.y * k.x.dot(&beta);
            if l > 0.0 && worst[k.group].map_or(true, |w| l > w.0) {
                worst[k.group] = Some((l, i));
            }
        }
        let mut g = beta.clone();
        for (_, i) in worst.into_iter().flatten() {
            cons[i].x.axpy(-c * cons[i].y, &mut g);
        }
        // strongly convex with modulus 1
        let eta = 1.0 / (t as f64 + 1.0);
        for (b, gi) in beta.iter_mut().zip(&g) {
            *b -= eta * gi;
        }
        best = best.min(objective(&beta));
    }
    best
}
