use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use posekit::graph::PartGraph;
use posekit::io::format;
use posekit::io::synth::{generate_synthetic, SynthConfig};
use posekit::model::MixtureModel;
use posekit::pipeline::{features, model_pyramid, predict_single};
use posekit_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = pk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model(graph: PartGraph) -> MixtureModel {
    let mut m = MixtureModel::zeros(graph, (2, 2), posekit::features::HOG_CHANNELS, true, 4);
    // some nonzero template weights so the optimum is unique enough to compare
    for (i, ts) in m.templates.iter_mut().enumerate() {
        for t in ts {
            for (j, w) in t.weights.iter_mut().enumerate() {
                *w = ((i * 31 + j * 7) % 13) as f64 / 13.0 - 0.5;
            }
        }
    }
    m
}

#[test]
fn estimate_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let m = model(PartGraph::upper_constrained(1));
    format::save(&m, &path).unwrap();
    let scene = &generate_synthetic(&SynthConfig {
        n: 1,
        width: 64,
        height: 64,
        torso: 16.0,
        ..Default::default()
    })[0];
    let mut opts = pk_pyramid_options_default();
    opts.levels = 1;
    opts.min_cells = 2;
    opts.padding = 2;

    let expected = {
        let pyr = features(&scene.raster, &model_pyramid(&m, &opts.into())).unwrap();
        predict_single(&m, &pyr).unwrap()
    };
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pk_model_load(cstr(&path).as_ptr(), &mut h), PK_OK);
        assert!(pk_last_error_message().is_null());
        assert_eq!(pk_model_num_parts(h), m.num_parts());
        let mut img = ptr::null_mut();
        let r = &scene.raster;
        assert_eq!(pk_image_from_gray(r.width(), r.height(), r.data().as_ptr(), &mut img), PK_OK);
        let mut xy = [0.0; 2 * PK_NUM_KEYPOINTS];
        let mut score = 0.0;
        assert_eq!(pk_estimate(h, img, &opts, xy.as_mut_ptr(), &mut score), PK_OK);
        assert_eq!(score, expected.1);
        for (k, p) in expected.0.iter().enumerate() {
            assert_eq!((xy[2 * k], xy[2 * k + 1]), (p.x, p.y));
        }
        let again = dir.path().join("again.bin");
        assert_eq!(pk_model_save(h, cstr(&again).as_ptr()), PK_OK);
        assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&path).unwrap());
        pk_image_free(img);
        pk_model_free(h);
    }
}

#[test]
fn two_tree_pairs_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let (lp, up) = (dir.path().join("l.bin"), dir.path().join("u.bin"));
    format::save(&model(PartGraph::lower_constrained(1)), &lp).unwrap();
    format::save(&model(PartGraph::upper_constrained(1)), &up).unwrap();
    unsafe {
        let (mut l, mut u, mut t) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(pk_model_load(cstr(&lp).as_ptr(), &mut l), PK_OK);
        assert_eq!(pk_model_load(cstr(&up).as_ptr(), &mut u), PK_OK);
        // swapped roles are rejected with the library's code
        assert_eq!(pk_two_tree_new(u, l, &mut t), 22);
        assert!(t.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(pk_two_tree_new(l, u, &mut t), PK_OK);
        let pixels: Vec<f64> = (0..48 * 48).map(|i| ((i * 37) % 255) as f64 / 255.0).collect();
        let mut img = ptr::null_mut();
        assert_eq!(pk_image_from_gray(48, 48, pixels.as_ptr(), &mut img), PK_OK);
        let mut opts = pk_pyramid_options_default();
        opts.levels = 1;
        opts.min_cells = 2;
        let mut xy = [f64::NAN; 2 * PK_NUM_KEYPOINTS];
        for order in [0, 1] {
            assert_eq!(pk_two_tree_estimate(t, img, &opts, order, xy.as_mut_ptr(), ptr::null_mut()), PK_OK);
            assert!(xy.iter().all(|v| v.is_finite()));
        }
        pk_image_free(img);
        pk_two_tree_free(t);
        pk_model_free(l);
        pk_model_free(u);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pk_model_load(ptr::null(), &mut h), PK_ERR_NULL);
        assert!(last_error().contains("null"));
        let missing = dir.path().join("missing.bin");
        assert_eq!(pk_model_load(cstr(&missing).as_ptr(), &mut h), 5);
        assert!(last_error().contains("missing.bin"));
        let junk = dir.path().join("junk.bin");
        std::fs::write(&junk, b"POSEKIT\0\x07\x00\x00\x00").unwrap();
        assert_eq!(pk_model_load(cstr(&junk).as_ptr(), &mut h), 12);
        assert!(h.is_null());
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(pk_model_load(bad.as_ptr().cast(), &mut h), PK_ERR_UTF8);
        let mut img = ptr::null_mut();
        assert_eq!(pk_image_from_gray(3, 3, ptr::null(), &mut img), PK_ERR_NULL);
        assert_eq!(pk_estimate(ptr::null(), ptr::null(), ptr::null(), ptr::null_mut(), ptr::null_mut()), PK_ERR_NULL);
        pk_model_free(ptr::null_mut());
        pk_image_free(ptr::null_mut());
        pk_two_tree_free(ptr::null_mut());
        assert_eq!(pk_model_num_parts(ptr::null()), 0);
        let v = CStr::from_ptr(pk_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn pdj_through_the_c_interface() {
    // torso 100: left shoulder (0,0), right hip (60,80); left elbow off by 25
    let mut gt = [0.0; 2 * PK_NUM_KEYPOINTS];
    gt[2 * 9] = 60.0;
    gt[2 * 9 + 1] = 80.0;
    let mut pred = gt;
    pred[2 * 4] += 25.0;
    let mut rates = [0.0; PK_NUM_THRESHOLDS];
    let mut avg = 0.0;
    unsafe {
        assert_eq!(pk_pdj_curve(pred.as_ptr(), gt.as_ptr(), 1, 4, rates.as_mut_ptr(), &mut avg), PK_OK);
        assert!((avg - 100.0 * 51.0 / 101.0).abs() < 1e-12);
        assert_eq!(rates[49], 0.0);
        assert_eq!(rates[50], 100.0);
        assert_eq!(pk_pdj_curve(gt.as_ptr(), gt.as_ptr(), 1, 4, rates.as_mut_ptr(), &mut avg), PK_OK);
        assert_eq!(avg, 100.0);
        assert_eq!(pk_pdj_curve(gt.as_ptr(), gt.as_ptr(), 1, 14, rates.as_mut_ptr(), &mut avg), 3);
    }
}

#[test]
fn header_declares_the_interface_and_compiles_as_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("posekit.h")).unwrap();
    for name in [
        "pk_model_load",
        "pk_model_free",
        "pk_two_tree_new",
        "pk_two_tree_estimate",
        "pk_image_from_gray",
        "pk_estimate",
        "pk_pdj_curve",
        "pk_last_error_message",
        "typedef struct PkModel PkModel",
        "#define PK_NUM_KEYPOINTS 14",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "posekit.h"
int use(const char *path, const double *pixels) {
    PkModel *m = NULL;
    PkImage *img = NULL;
    double xy[2 * PK_NUM_KEYPOINTS], score;
    PkPyramidOptions o = pk_pyramid_options_default();
    int32_t rc = pk_model_load(path, &m);
    if (rc != PK_OK) return rc;
    rc = pk_image_from_gray(8, 8, pixels, &img);
    if (rc == PK_OK) rc = pk_estimate(m, img, &o, xy, &score);
    pk_image_free(img);
    pk_model_free(m);
    return rc;
}
"#,
    )
    .unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(&include).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found, header only checked textually"),
    }
}
