mod common;

use common::*;
use posekit::features::FeaturePyramid;
use posekit::graph::{is_lower_body_keypoint, PartGraph, NUM_KEYPOINTS};
use posekit::inference::{infer_max, CellClamp};
use posekit::model::MixtureModel;
use posekit::two_trees::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tree_models(seed: u64, types: usize, k: usize) -> (TwoTreeModel, FeaturePyramid) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotated = k > 1;
    let mut lower = MixtureModel::zeros(PartGraph::lower_constrained(types), (1, 2), 2, rotated, k);
    let mut upper = MixtureModel::zeros(PartGraph::upper_constrained(types), (2, 1), 2, rotated, k);
    randomize(&mut rng, &mut lower);
    randomize(&mut rng, &mut upper);
    let pyr = random_pyramid(&mut rng, 7, 6, 2, k);
    (TwoTreeModel::new(lower, upper).unwrap(), pyr)
}

#[test]
fn empty_evidence_is_plain_inference() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..10 {
        let m = random_chain_model(&mut rng, 3, 2, 2, 2, (2, 2));
        let pyr = random_pyramid(&mut rng, 5, 5, 2, 2);
        assert_eq!(
            clamp_inference(&m, &pyr, &Evidence::default()).unwrap(),
            infer_max(&m, &pyr).unwrap()
        );
    }
    let (models, pyr) = random_tree_models(41, 2, 1);
    assert_eq!(
        clamp_inference(&models.upper, &pyr, &Evidence::default()).unwrap(),
        infer_max(&models.upper, &pyr).unwrap()
    );
}

#[test]
fn clamped_leaf_matches_restricted_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..30 {
        let k = rng.gen_range(1..3);
        let m = random_chain_model(&mut rng, 3, 2, 2, k, (1, 2));
        let pyr = random_pyramid(&mut rng, 5, 5, 2, k);
        let (y, x) = (rng.gen_range(0..5), rng.gen_range(0..5));
        let orientation = if rng.gen_bool(0.5) { Some(rng.gen_range(0..k)) } else { None };
        let ev = Evidence {
            level: 0,
            parts: vec![(2, CellClamp { y, x, orientation })],
        };
        let det = clamp_inference(&m, &pyr, &ev).unwrap();
        let (s, pose) = brute_force(&m, &pyr, 0, &[None, None, Some((y, x, orientation))]).unwrap();
        assert_eq!(det.score, s);
        assert_eq!(det.pose.parts, pose.parts);
    }
}

#[test]
fn clamping_every_part_returns_that_placement() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let m = random_chain_model(&mut rng, 4, 3, 2, 1, (1, 1));
    let pyr = random_pyramid(&mut rng, 6, 6, 2, 1);
    let cells: Vec<(i32, i32)> = (0..4).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6))).collect();
    let ev = Evidence {
        level: 0,
        parts: cells
            .iter()
            .enumerate()
            .map(|(i, &(y, x))| (i, CellClamp { y, x, orientation: None }))
            .collect(),
    };
    let det = clamp_inference(&m, &pyr, &ev).unwrap();
    for (p, &(y, x)) in det.pose.parts.iter().zip(&cells) {
        assert_eq!((p.y, p.x), (y, x));
    }
    let (s, _) = brute_force(
        &m,
        &pyr,
        0,
        &cells.iter().map(|&(y, x)| Some((y, x, None))).collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(det.score, s);
}

#[test]
fn bad_evidence_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let m = random_chain_model(&mut rng, 2, 1, 2, 1, (1, 1));
    let pyr = random_pyramid(&mut rng, 4, 4, 2, 1);
    let at = |part, y, x| Evidence {
        level: 0,
        parts: vec![(part, CellClamp { y, x, orientation: None })],
    };
    assert!(clamp_inference(&m, &pyr, &at(0, 4, 0)).is_err());
    assert!(clamp_inference(&m, &pyr, &at(0, -1, 0)).is_err());
    assert!(clamp_inference(&m, &pyr, &at(2, 0, 0)).is_err());
    let mut twice = at(1, 0, 0);
    twice.parts.push((1, CellClamp { y: 1, x: 1, orientation: None }));
    assert!(clamp_inference(&m, &pyr, &twice).is_err());
    let mut far = at(1, 0, 0);
    far.level = 3;
    assert!(clamp_inference(&m, &pyr, &far).is_err());
}

#[test]
fn lower_body_comes_from_the_lower_tree() {
    for seed in 0..4 {
        let (models, pyr) = random_tree_models(50 + seed, 2, if seed % 2 == 0 { 1 } else { 2 });
        let out = two_tree_estimate(&models, &pyr, TreeOrder::LowerFirst).unwrap();
        assert_eq!(out.keypoints.len(), NUM_KEYPOINTS);
        assert!(out.keypoints.iter().all(|p| p.is_finite()));
        let lower = infer_max(&models.lower, &pyr).unwrap();
        assert_eq!(out.first, lower);
        let lk = models.lower.graph.keypoints_from_nodes(&lower.pose.pixel_locations(&pyr));
        for k in (0..NUM_KEYPOINTS).filter(|&k| is_lower_body_keypoint(k)) {
            assert_eq!(out.keypoints[k].x.to_bits(), lk[k].x.to_bits());
            assert_eq!(out.keypoints[k].y.to_bits(), lk[k].y.to_bits());
        }
        // the upper pass kept the legs where the lower pass put them
        let uk = models.upper.graph.keypoints_from_nodes(&out.second.pose.pixel_locations(&pyr));
        for k in (0..NUM_KEYPOINTS).filter(|&k| is_lower_body_keypoint(k)) {
            assert_eq!(uk[k], lk[k]);
        }
        for k in (0..NUM_KEYPOINTS).filter(|&k| !is_lower_body_keypoint(k)) {
            assert_eq!(out.keypoints[k], uk[k]);
        }
        assert_eq!(out.second.pose.level, lower.pose.level);
    }
}

#[test]
fn reverse_order_keeps_the_upper_tree_arms() {
    let (models, pyr) = random_tree_models(60, 1, 1);
    let out = two_tree_estimate(&models, &pyr, TreeOrder::UpperFirst).unwrap();
    let upper = infer_max(&models.upper, &pyr).unwrap();
    assert_eq!(out.first, upper);
    let uk = models.upper.graph.keypoints_from_nodes(&upper.pose.pixel_locations(&pyr));
    for k in (0..NUM_KEYPOINTS).filter(|&k| !is_lower_body_keypoint(k)) {
        assert_eq!(out.keypoints[k], uk[k]);
    }
}

#[test]
fn agreeing_trees_give_their_common_pose() {
    // an upper tree whose legs are clamped to its own optimum reproduces it
    let (models, pyr) = random_tree_models(61, 2, 1);
    let upper = infer_max(&models.upper, &pyr).unwrap();
    let ev = Evidence {
        level: upper.pose.level,
        parts: (0..models.upper.num_parts())
            .filter(|&i| models.upper.graph.part(i).body_half == posekit::graph::BodyHalf::Lower)
            .map(|i| {
                let p = upper.pose.parts[i];
                (i, CellClamp { y: p.y, x: p.x, orientation: None })
            })
            .collect(),
    };
    assert_eq!(clamp_inference(&models.upper, &pyr, &ev).unwrap(), upper);
}

#[test]
fn mismatched_models_are_rejected() {
    let (models, _) = random_tree_models(62, 1, 1);
    assert!(TwoTreeModel::new(models.upper.clone(), models.lower.clone()).is_err());
    let other = MixtureModel::zeros(PartGraph::upper_constrained(1), (2, 1), 2, true, 4);
    assert!(TwoTreeModel::new(models.lower.clone(), other).is_err());
}
