//! C ABI for posekit.
//!
//! Models, two-tree pairs and images are opaque handles created by `*_load`
//! or `*_new` functions and released with the matching `*_free`. Every
//! fallible call returns a status: `PK_OK`, a negative code for misuse of the
//! interface, or the positive code of the library error. The message of the
//! last failure on the calling thread is available from
//! `pk_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use posekit::eval::{pdj_curve, EvalRecord, JointGroup, NUM_THRESHOLDS};
use posekit::features::PyramidConfig;
use posekit::geometry::Point;
use posekit::graph::NUM_KEYPOINTS;
use posekit::io::format;
use posekit::model::MixtureModel;
use posekit::pipeline::{features, model_pyramid, predict_single, predict_two_trees};
use posekit::raster::Raster;
use posekit::two_trees::{TreeOrder, TwoTreeModel};
use posekit::PoseError;

pub const PK_OK: i32 = 0;
/// A required pointer argument was null.
pub const PK_ERR_NULL: i32 = -1;
/// A string argument was not valid UTF-8.
pub const PK_ERR_UTF8: i32 = -2;
/// The library panicked; the handle involved should not be reused.
pub const PK_ERR_PANIC: i32 = -3;

/// Keypoints per person; keypoint buffers hold twice as many doubles (x, y).
pub const PK_NUM_KEYPOINTS: usize = 14;
/// Length of a PDJ curve.
pub const PK_NUM_THRESHOLDS: usize = 101;

const _: () = assert!(PK_NUM_KEYPOINTS == NUM_KEYPOINTS && PK_NUM_THRESHOLDS == NUM_THRESHOLDS);

/// A trained single-tree model.
pub struct PkModel(MixtureModel);

/// A lower-constrained and an upper-constrained model used together.
pub struct PkTwoTree(TwoTreeModel);

/// A gray or RGB image with values in [0, 1].
pub struct PkImage(Raster);

/// Feature pyramid settings for inference. Cell size and orientation bins
/// always come from the model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PkPyramidOptions {
    pub scale_step: f64,
    pub base_scale: f64,
    /// 0 for every level that fits.
    pub levels: u32,
    pub padding: u32,
    pub min_cells: u32,
}

impl From<PkPyramidOptions> for PyramidConfig {
    fn from(o: PkPyramidOptions) -> Self {
        PyramidConfig {
            scale_step: o.scale_step,
            base_scale: o.base_scale,
            levels: o.levels as usize,
            padding: o.padding as usize,
            min_cells: o.min_cells as usize,
            ..PyramidConfig::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: PoseError) -> i32 {
    set_error(e.to_string());
    e.code()
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), i32>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PK_OK,
        Ok(Err(code)) => code,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            PK_ERR_PANIC
        }
    }
}

fn null(what: &str) -> i32 {
    set_error(format!("{what} is null"));
    PK_ERR_NULL
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, i32> {
    if p.is_null() {
        return Err(null("path"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(PK_ERR_UTF8)
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, i32> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), i32> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_keypoints(kps: &[Point], score: f64, out_xy: *mut f64, out_score: *mut f64) -> Result<(), i32> {
    if out_xy.is_null() {
        return Err(null("keypoint buffer"));
    }
    let buf = std::slice::from_raw_parts_mut(out_xy, 2 * NUM_KEYPOINTS);
    for (k, p) in kps.iter().enumerate() {
        buf[2 * k] = p.x;
        buf[2 * k + 1] = p.y;
    }
    if let Some(s) = out_score.as_mut() {
        *s = score;
    }
    Ok(())
}

fn options(opts: *const PkPyramidOptions) -> PyramidConfig {
    // SAFETY: callers pass null or a valid options struct
    match unsafe { opts.as_ref() } {
        Some(o) => (*o).into(),
        None => PyramidConfig::default(),
    }
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn pk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn pk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default pyramid options.
#[no_mangle]
pub extern "C" fn pk_pyramid_options_default() -> PkPyramidOptions {
    let d = PyramidConfig::default();
    PkPyramidOptions {
        scale_step: d.scale_step,
        base_scale: d.base_scale,
        levels: d.levels as u32,
        padding: d.padding as u32,
        min_cells: d.min_cells as u32,
    }
}

/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pk_model_load(path: *const c_char, out: *mut *mut PkModel) -> i32 {
    guard(|| {
        let path = path_arg(path)?;
        let m: MixtureModel = format::load(&path).map_err(fail)?;
        put(out, PkModel(m))
    })
}

/// # Safety
/// `model` must come from this library; `path` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn pk_model_save(model: *const PkModel, path: *const c_char) -> i32 {
    guard(|| {
        let m = handle(model, "model")?;
        let path = path_arg(path)?;
        format::save(&m.0, &path).map_err(fail)
    })
}

/// Number of parts of the model, 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pk_model_num_parts(model: *const PkModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_parts())
}

/// # Safety
/// `model` must be null or come from `pk_model_load`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pk_model_free(model: *mut PkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Pairs copies of a lower-constrained and an upper-constrained model.
///
/// # Safety
/// Both models must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pk_two_tree_new(lower: *const PkModel, upper: *const PkModel, out: *mut *mut PkTwoTree) -> i32 {
    guard(|| {
        let (l, u) = (handle(lower, "lower model")?, handle(upper, "upper model")?);
        let t = TwoTreeModel::new(l.0.clone(), u.0.clone()).map_err(fail)?;
        put(out, PkTwoTree(t))
    })
}

/// # Safety
/// `models` must be null or come from `pk_two_tree_new`, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pk_two_tree_free(models: *mut PkTwoTree) {
    if !models.is_null() {
        drop(Box::from_raw(models));
    }
}

/// # Safety
/// `path` must be nul-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pk_image_load(path: *const c_char, out: *mut *mut PkImage) -> i32 {
    guard(|| {
        let path = path_arg(path)?;
        put(out, PkImage(Raster::load(&path).map_err(fail)?))
    })
}

/// Gray image from `width * height` row-major values in [0, 1].
///
/// # Safety
/// `pixels` must point at `width * height` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn pk_image_from_gray(width: usize, height: usize, pixels: *const f64, out: *mut *mut PkImage) -> i32 {
    guard(|| {
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        let n = width.checked_mul(height).ok_or_else(|| fail(PoseError::InvalidArgument("image too large".into())))?;
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        put(out, PkImage(Raster::from_vec(width, height, 1, data).map_err(fail)?))
    })
}

/// # Safety
/// `image` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pk_image_free(image: *mut PkImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Best pose of a single model. Writes `2 * PK_NUM_KEYPOINTS` doubles
/// (x0, y0, x1, y1, ...) in pixels and, if `out_score` is not null, the score.
/// `opts` may be null for defaults.
///
/// # Safety
/// Handles must come from this library; `out_xy` must hold 28 doubles.
#[no_mangle]
pub unsafe extern "C" fn pk_estimate(
    model: *const PkModel,
    image: *const PkImage,
    opts: *const PkPyramidOptions,
    out_xy: *mut f64,
    out_score: *mut f64,
) -> i32 {
    guard(|| {
        let (m, img) = (handle(model, "model")?, handle(image, "image")?);
        let pyr = features(&img.0, &model_pyramid(&m.0, &options(opts))).map_err(fail)?;
        let (kps, score) = predict_single(&m.0, &pyr).map_err(fail)?;
        write_keypoints(&kps, score, out_xy, out_score)
    })
}

/// Two-tree estimate: legs from the lower tree, the rest from the upper tree
/// clamped to them. With `upper_first` nonzero the roles are swapped.
///
/// # Safety
/// As for `pk_estimate`.
#[no_mangle]
pub unsafe extern "C" fn pk_two_tree_estimate(
    models: *const PkTwoTree,
    image: *const PkImage,
    opts: *const PkPyramidOptions,
    upper_first: i32,
    out_xy: *mut f64,
    out_score: *mut f64,
) -> i32 {
    guard(|| {
        let (t, img) = (handle(models, "two-tree model")?, handle(image, "image")?);
        let pyr = features(&img.0, &model_pyramid(&t.0.upper, &options(opts))).map_err(fail)?;
        let order = if upper_first != 0 {
            TreeOrder::UpperFirst
        } else {
            TreeOrder::LowerFirst
        };
        let (kps, score) = predict_two_trees(&t.0, &pyr, order).map_err(fail)?;
        write_keypoints(&kps, score, out_xy, out_score)
    })
}

/// PDJ curve of one keypoint over `n` people. `pred` and `gt` hold
/// `n * 2 * PK_NUM_KEYPOINTS` doubles laid out as in `pk_estimate`; NaN
/// ground truth marks an unannotated joint. Writes `PK_NUM_THRESHOLDS` rates
/// in percent and, if `out_avg` is not null, their mean.
///
/// # Safety
/// Buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pk_pdj_curve(
    pred: *const f64,
    gt: *const f64,
    n: usize,
    keypoint: usize,
    out_rates: *mut f64,
    out_avg: *mut f64,
) -> i32 {
    guard(|| {
        if pred.is_null() || gt.is_null() || out_rates.is_null() {
            return Err(null("buffer"));
        }
        if keypoint >= NUM_KEYPOINTS {
            return Err(fail(PoseError::InvalidArgument(format!("keypoint {keypoint} out of range"))));
        }
        let len = 2 * NUM_KEYPOINTS;
        let (p, g) = (std::slice::from_raw_parts(pred, n * len), std::slice::from_raw_parts(gt, n * len));
        let points = |v: &[f64]| -> Vec<Point> { v.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect() };
        let records = p
            .chunks_exact(len)
            .zip(g.chunks_exact(len))
            .enumerate()
            .map(|(i, (a, b))| EvalRecord::new(i.to_string(), points(a), points(b), vec![]))
            .collect::<posekit::Result<Vec<_>>>()
            .map_err(fail)?;
        let curve = pdj_curve(&records, &[JointGroup::new("joint", &[keypoint])]).map_err(fail)?;
        std::slice::from_raw_parts_mut(out_rates, NUM_THRESHOLDS).copy_from_slice(&curve.rates[0]);
        if let Some(a) = out_avg.as_mut() {
            *a = curve.pdj_avg[0];
        }
        Ok(())
    })
}
