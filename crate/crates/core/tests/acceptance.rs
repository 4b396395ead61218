//! Acceptance report: one PASS or FAIL line per criterion.
//!
//! The exit status is nonzero only when a check cannot run at all. Failed
//! criteria are reported, not hidden; the assertions in the other test
//! targets guard the exact properties individually.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use common::ssvm::*;
use common::*;
use posekit::cli::cli_main;
use posekit::eval::{pdj_curve, EvalRecord, JointGroup};
use posekit::features::FeaturePyramid;
use posekit::gdt::{gdt_1d, gdt_2d};
use posekit::geometry::Point;
use posekit::graph::{is_lower_body_keypoint, kp, PartGraph, NUM_KEYPOINTS};
use posekit::inference::infer_max;
use posekit::io::config::RunConfig;
use posekit::io::format::{from_bytes, to_bytes, Persist};
use posekit::io::synth::{generate_synthetic, PoseFamily, SynthConfig, SyntheticScene};
use posekit::io::PersonRecord;
use posekit::learning::{svm_objective, train, SparseVec, SvmState, TrainConfig};
use posekit::model::MixtureModel;
use posekit::phraselets::{pattern_vector, PhraseletMode};
use posekit::pipeline::{all_features, predict_single, predict_two_trees, train_variant, TrainedVariant, Variant};
use posekit::two_trees::{clamp_inference, two_tree_estimate, Evidence, TreeOrder, TwoTreeModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(bool, String), String>;

struct Report {
    failed: usize,
    errors: usize,
    total: usize,
}

impl Report {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Check) {
        let t = Instant::now();
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
        let secs = t.elapsed().as_secs_f64();
        self.total += 1;
        match out {
            Ok(Ok((true, detail))) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Ok(Ok((false, detail))) => {
                self.failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
            Ok(Err(e)) => {
                self.failed += 1;
                self.errors += 1;
                println!("FAIL {name}: error: {e} [{secs:.1}s]");
            }
            Err(_) => {
                self.failed += 1;
                self.errors += 1;
                println!("FAIL {name}: panicked [{secs:.1}s]");
            }
        }
    }
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn inference_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..100 {
        let parts = rng.gen_range(1..=3);
        let types = rng.gen_range(1..=2);
        let k = rng.gen_range(1..=4);
        let (rows, cols) = (rng.gen_range(2..=6), rng.gen_range(2..=6));
        let tpl = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let m = random_chain_model(&mut rng, parts, types, 2, k, tpl);
        let pyr = random_pyramid(&mut rng, rows, cols, 2, k);
        let det = infer_max(&m, &pyr).map_err(e)?;
        let (s, pose) = brute_force(&m, &pyr, 0, &[]).ok_or("no placement")?;
        if det.score != s || det.pose.parts != pose.parts {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        mismatches == 0 && secs < 60.0,
        format!("{mismatches} of 100 models differ from enumeration, {secs:.1}s (limit 60s)"),
    ))
}

fn gdt_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=64);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (a, b) = (rng.gen_range(0.01..2.0), rng.gen_range(-1.0..1.0));
        if gdt_1d(&f, a, b).map_err(e)? != naive_gdt_1d(&f, a, b) {
            bad += 1;
        }
    }
    for _ in 0..100 {
        let f: Vec<f64> = (0..64).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (wx2, wy2) = (rng.gen_range(0.01..2.0), rng.gen_range(0.01..2.0));
        let (wx1, wy1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (v, _) = gdt_2d(&f, 8, 8, wx2, wx1, wy2, wy1).map_err(e)?;
        if v != naive_gdt_2d(&f, 8, 8, wx2, wx1, wy2, wy1) {
            bad += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((bad == 0 && secs < 10.0, format!("{bad} of 300 transforms differ, {secs:.2}s (limit 10s)")))
}

fn rotation_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let others = [1, 2, 3, 4, 5];
    let (mut worst_rn, mut least_plain) = (0.0f64, f64::INFINITY);
    for _ in 0..50 {
        let pts: Vec<Point> = (0..6).map(|_| Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let theta = rng.gen_range(-PI..PI);
        let alpha = rng.gen_range(30f64..330.0).to_radians();
        let c = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let turned: Vec<Point> = pts.iter().map(|p| p.rotate_about(c, alpha)).collect();
        let v = |p: &[Point], mode, t| pattern_vector(p, 0, &others, mode, t, 1.0).map_err(e).map(Option::unwrap);
        let inf = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let rn = inf(
            &v(&pts, PhraseletMode::RotationNormalized, Some(theta))?,
            &v(&turned, PhraseletMode::RotationNormalized, Some(theta + alpha))?,
        );
        let plain = inf(&v(&pts, PhraseletMode::Plain, None)?, &v(&turned, PhraseletMode::Plain, None)?);
        worst_rn = worst_rn.max(rn);
        least_plain = least_plain.min(plain);
    }
    Ok((
        worst_rn < 1e-9 && least_plain > 0.01,
        format!("normalized change at most {worst_rn:.2e} (< 1e-9), plain change at least {least_plain:.3} (> 0.01)"),
    ))
}

fn ssvm() -> Check {
    // separable: +e0 and -e0 with C = 1, optimum beta = e0 with zero slack
    let unit = |v: f64| SparseVec { entries: vec![(0, v)] };
    let mut s = SvmState::new(2, 1.0);
    s.add(0, 1.0, unit(1.0));
    s.add(1, -1.0, unit(-1.0));
    let trace = s.optimize(100, 1e-12).map_err(e)?;
    let beta_err = (s.incumbent[0] - 1.0).abs().max(s.incumbent[1].abs());
    let slack = s.loss(0).max(s.loss(1));
    let mut monotone = trace.windows(2).all(|w| w[1].primal <= w[0].primal && w[1].dual >= w[0].dual);

    let toy = toy_problem(11);
    let data = instances(&toy);
    let cfg = TrainConfig {
        c: 0.5,
        epochs: 4,
        negatives_per_image: 5,
        tolerance: 1e-10,
        max_sweeps: 5000,
        ..Default::default()
    };
    let res = train(&toy.model, &data, &cfg, |_, _| {}).map_err(e)?;
    let sweeps: usize = res.sweeps.iter().map(Vec::len).sum();
    for round in &res.sweeps {
        monotone &= round
            .windows(2)
            .all(|w| w[1].primal <= w[0].primal && w[1].dual >= w[0].dual - 1e-12 * w[0].dual.abs().max(1.0));
    }
    let ours = svm_objective(&res.state.incumbent, cfg.c, &res.state.constraints);
    let reference = subgradient_reference(cfg.c, res.state.dim(), &res.state.constraints, 200_000);
    let rel = ours / reference - 1.0;
    Ok((
        beta_err < 1e-4 && slack <= 1e-12 && rel <= 0.01 && monotone,
        format!(
            "toy |beta - e0| = {beta_err:.1e}, slack {slack:.1e}; structured objective {ours:.6} vs reference {reference:.6} ({:+.3}%); monotone over {sweeps} sweeps: {monotone}",
            100.0 * rel
        ),
    ))
}

fn pdj() -> Check {
    let mut gt: Vec<Point> = (0..NUM_KEYPOINTS).map(|k| Point::new(10.0 * k as f64, 200.0)).collect();
    gt[kp::L_SHOULDER] = Point::new(0.0, 0.0);
    gt[kp::R_HIP] = Point::new(60.0, 80.0);
    let mut pred = gt.clone();
    pred[kp::L_ELBOW].x += 25.0;
    let elbow = [JointGroup::new("l_elbow", &[kp::L_ELBOW])];
    let r = EvalRecord::new("a", pred, gt.clone(), vec![]).map_err(e)?;
    let quarter = pdj_curve(&[r], &elbow).map_err(e)?.pdj_avg[0];
    let r = EvalRecord::new("a", gt.clone(), gt, vec![]).map_err(e)?;
    let perfect = pdj_curve(&[r], &JointGroup::standard()).map_err(e)?;
    let all100 = perfect.pdj_avg.iter().all(|&v| v == 100.0);
    Ok((
        (quarter - 50.50).abs() <= 0.01 && all100,
        format!("0.25 torso error gives {quarter:.4} (50.50 +/- 0.01); perfect gives 100 on every joint: {all100}"),
    ))
}

fn two_tree_guarantees() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = 0;
    for i in 0..20 {
        let k = 1 + i % 3;
        let rotated = k > 1;
        let mut lower = MixtureModel::zeros(PartGraph::lower_constrained(2), (1, 2), 2, rotated, k);
        let mut upper = MixtureModel::zeros(PartGraph::upper_constrained(2), (2, 1), 2, rotated, k);
        randomize(&mut rng, &mut lower);
        randomize(&mut rng, &mut upper);
        let pyr = random_pyramid(&mut rng, 7, 6, 2, k);
        let models = TwoTreeModel::new(lower, upper).map_err(e)?;
        let out = two_tree_estimate(&models, &pyr, TreeOrder::LowerFirst).map_err(e)?;
        let l = infer_max(&models.lower, &pyr).map_err(e)?;
        let lk = models.lower.graph.keypoints_from_nodes(&l.pose.pixel_locations(&pyr));
        let same_legs = (0..NUM_KEYPOINTS)
            .filter(|&k| is_lower_body_keypoint(k))
            .all(|k| out.keypoints[k].x.to_bits() == lk[k].x.to_bits() && out.keypoints[k].y.to_bits() == lk[k].y.to_bits());
        let empty_u = clamp_inference(&models.upper, &pyr, &Evidence::default()).map_err(e)? == infer_max(&models.upper, &pyr).map_err(e)?;
        let empty_l = clamp_inference(&models.lower, &pyr, &Evidence::default()).map_err(e)? == l;
        if !(same_legs && empty_u && empty_l) {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} of 20 random model pairs break bit-identical legs or empty-evidence equality")))
}

struct Trained {
    mop: TrainedVariant,
    upper: TrainedVariant,
    lower: TrainedVariant,
    legs: Vec<SyntheticScene>,
    legs_feats: Vec<FeaturePyramid>,
    train_time: Duration,
}

fn scenes(cfg: &RunConfig, family: PoseFamily, n: usize, first: usize) -> Vec<SyntheticScene> {
    generate_synthetic(&SynthConfig {
        n,
        family,
        first,
        seed: cfg.seed,
        ..Default::default()
    })
}

fn feats(cfg: &RunConfig, s: &[SyntheticScene]) -> Result<Vec<FeaturePyramid>, String> {
    all_features(&s.iter().map(|x| x.raster.clone()).collect::<Vec<_>>(), &cfg.pyramid).map_err(e)
}

fn pdj_of(pred: Vec<Vec<Point>>, scenes: &[SyntheticScene], joints: &[&str]) -> Result<Vec<f64>, String> {
    let recs = pred
        .into_iter()
        .zip(scenes)
        .map(|(p, s)| EvalRecord::new(s.file_name(), p, s.person.as_ref().unwrap().points(), vec![]))
        .collect::<posekit::Result<Vec<_>>>()
        .map_err(e)?;
    let c = pdj_curve(&recs, &JointGroup::standard()).map_err(e)?;
    Ok(joints.iter().map(|j| c.avg(j).unwrap()).collect())
}

fn end_to_end(slot: &mut Option<Trained>) -> Check {
    let t0 = Instant::now();
    let cfg = RunConfig::from_toml(include_str!("../configs/synthetic.toml")).map_err(e)?;
    let mut train_scenes = scenes(&cfg, PoseFamily::Upright, 20, 0);
    train_scenes.extend(scenes(&cfg, PoseFamily::Rotated, 20, 0));
    let negs = scenes(&cfg, PoseFamily::Negative, 10, 0);
    let rotated = scenes(&cfg, PoseFamily::Rotated, 20, 100);
    let legs = scenes(&cfg, PoseFamily::LegsCrossed, 20, 200);
    let (tf, nf, rf, lf) = (feats(&cfg, &train_scenes)?, feats(&cfg, &negs)?, feats(&cfg, &rotated)?, feats(&cfg, &legs)?);
    let pos: Vec<(&FeaturePyramid, &PersonRecord)> = tf.iter().zip(&train_scenes).map(|(f, s)| (f, s.person.as_ref().unwrap())).collect();
    let neg: Vec<&FeaturePyramid> = nf.iter().collect();
    let tr = |v| train_variant(v, &cfg, &pos, &neg, |_, _| {}).map_err(e);
    let (mop, upper, lower) = (tr(Variant::Mop)?, tr(Variant::RotNorm)?, tr(Variant::RotNormLower)?);
    let train_time = t0.elapsed();

    let single = |m: &MixtureModel, f: &[FeaturePyramid]| f.iter().map(|p| predict_single(m, p).map(|r| r.0)).collect::<posekit::Result<Vec<_>>>().map_err(e);
    let arms = ["elbow", "wrist"];
    let a_mop = pdj_of(single(&mop.result.model, &rf)?, &rotated, &arms)?;
    let a_rn = pdj_of(single(&upper.result.model, &rf)?, &rotated, &arms)?;
    let two = TwoTreeModel::new(lower.result.model.clone(), upper.result.model.clone()).map_err(e)?;
    let legs_j = ["knee", "ankle"];
    let l_up = pdj_of(single(&upper.result.model, &lf)?, &legs, &legs_j)?;
    let l_low = pdj_of(single(&lower.result.model, &lf)?, &legs, &legs_j)?;
    let two_pred = lf.iter().map(|p| predict_two_trees(&two, p, TreeOrder::LowerFirst).map(|r| r.0)).collect::<posekit::Result<Vec<_>>>().map_err(e)?;
    let l_two = pdj_of(two_pred, &legs, &legs_j)?;
    let secs = t0.elapsed().as_secs_f64();

    let rn_gain = a_rn[0] - a_mop[0] >= 5.0 && a_rn[1] - a_mop[1] >= 5.0;
    let order = (0..2).all(|j| l_two[j] >= l_low[j] && l_low[j] >= l_up[j]);
    *slot = Some(Trained { mop, upper, lower, legs, legs_feats: lf, train_time });
    Ok((
        rn_gain && order && secs < 1800.0,
        format!(
            "rotated elbow/wrist: RotNorm {:.1}/{:.1} vs MoP {:.1}/{:.1} (need +5: {rn_gain}); legs-crossed knee/ankle: two-trees {:.1}/{:.1}, lower {:.1}/{:.1}, upper {:.1}/{:.1} (need two >= lower >= upper: {order}); {secs:.0}s (limit 1800s)",
            a_rn[0], a_rn[1], a_mop[0], a_mop[1], l_two[0], l_two[1], l_low[0], l_low[1], l_up[0], l_up[1]
        ),
    ))
}

fn runtime(t: &Option<Trained>) -> Check {
    let t = t.as_ref().ok_or("end-to-end models unavailable")?;
    let two = TwoTreeModel::new(t.lower.result.model.clone(), t.upper.result.model.clone()).map_err(e)?;
    let time = |f: &dyn Fn(&FeaturePyramid) -> posekit::Result<()>| -> Result<f64, String> {
        // best of three passes over the 20 images
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let s = Instant::now();
            for p in &t.legs_feats {
                f(p).map_err(e)?;
            }
            best = best.min(s.elapsed().as_secs_f64());
        }
        Ok(best)
    };
    let single = time(&|p| infer_max(&t.upper.result.model, p).map(drop))?;
    let double = time(&|p| two_tree_estimate(&two, p, TreeOrder::LowerFirst).map(drop))?;
    let ratio = double / single;
    Ok((
        ratio <= 2.2,
        format!("two-trees {double:.2}s vs single tree {single:.2}s on {} images: {ratio:.2}x (limit 2.2x)", t.legs.len()),
    ))
}

fn round_trip<T: Persist>(v: &T) -> Result<bool, String> {
    let b = to_bytes(v).map_err(e)?;
    let back: T = from_bytes(&b).map_err(e)?;
    Ok(to_bytes(&back).map_err(e)? == b)
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_pipeline(root: &Path, cfg: &Path) -> Result<(), String> {
    let f = |n: &str| root.join(n).display().to_string();
    let c = cfg.display().to_string();
    let call = |rest: &[&str]| {
        let args = ["posekit", "--config", &c, "--seed", "3"].iter().chain(rest).map(|s| s.to_string()).collect::<Vec<_>>();
        match cli_main(args) {
            0 => Ok(()),
            code => Err(format!("{rest:?} exited with {code}")),
        }
    };
    call(&["synth", "--out", &f("train"), "--n", "3", "--width", "96", "--height", "96", "--torso", "24"])?;
    call(&["synth", "--out", &f("neg"), "--family", "negative", "--n", "2", "--width", "96", "--height", "96"])?;
    let (ann, negs, model) = (f("train/annotations.jsonl"), f("neg/negatives.txt"), f("m.bin"));
    let log = f("log.csv");
    call(&["train", "--annotations", &ann, "--negatives", &negs, "--variant", "rotnorm", "--out", &model, "--log", &log])?;
    call(&["infer", "--annotations", &ann, "--upper", &model, "--out", &f("pred.jsonl")])?;
    let pred = format!("m={}", f("pred.jsonl"));
    call(&["eval", "--gt", &ann, "--pred", &pred, "--out", &f("results.csv")])
}

fn determinism(t: &Option<Trained>) -> Check {
    let t = t.as_ref().ok_or("end-to-end models unavailable")?;
    let two = TwoTreeModel::new(t.lower.result.model.clone(), t.upper.result.model.clone()).map_err(e)?;
    let trips = [
        round_trip(&t.mop.result.model)?,
        round_trip(&t.upper.result.model)?,
        round_trip(&two)?,
        round_trip(&t.upper.book)?,
        round_trip(&t.lower.result.state)?,
    ];
    let exact = trips.iter().all(|&b| b);
    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("run.toml");
    let tiny = "[pyramid]\nlevels = 1\norientation_count = 4\nmin_cells = 3\npadding = 2\n[phraselets]\nk = 2\n[model]\ntemplate = [3, 3]\ntorso_cells = 6.0\n[train]\nepochs = 1\n";
    std::fs::write(&cfg, tiny).map_err(e)?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli_pipeline(&a, &cfg)?;
    cli_pipeline(&b, &cfg)?;
    let (fa, fb) = (tree_bytes(&a), tree_bytes(&b));
    let same = fa == fb;
    Ok((
        exact && same,
        format!(
            "5 trained artifacts round-trip bit-exact: {exact}; two seeded CLI runs wrote {} byte-identical files: {same}; {} training rounds took {:.0}s",
            fa.len(),
            t.upper.result.log.len(),
            t.train_time.as_secs_f64()
        ),
    ))
}

fn main() {
    let mut r = Report { failed: 0, errors: 0, total: 0 };
    r.run("inference matches exhaustive enumeration", inference_oracle);
    r.run("distance transform matches the quadratic oracle", gdt_oracle);
    r.run("rotation-normalized patterns are rotation invariant", rotation_invariance);
    r.run("structured SVM optimum and monotone objective", ssvm);
    r.run("PDJ fixtures", pdj);
    r.run("two-tree construction guarantees", two_tree_guarantees);
    let mut trained = None;
    r.run("directional end-to-end on synthetic scenes", || end_to_end(&mut trained));
    r.run("two-tree inference cost", || runtime(&trained));
    r.run("serialization and seeded CLI determinism", || determinism(&trained));
    println!("{} of {} criteria passed", r.total - r.failed, r.total);
    if r.errors > 0 {
        std::process::exit(1);
    }
}
