//! Generalized distance transforms: `max_q f[q] - a(p-q)^2 - b(p-q)` in linear time
//! via the upper envelope of the parabolas rooted at each `q`.

use crate::error::{PoseError, Result};

/// Floor on quadratic deformation coefficients.
pub const EPS_DEF: f64 = 0.01;

fn check_coeff(a: f64) -> Result<()> {
    if a.is_nan() || a < EPS_DEF {
        return Err(PoseError::IllPosedTransform {
            value: a,
            floor: EPS_DEF,
        });
    }
    Ok(())
}

/// Reusable buffers for repeated transforms.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    hull: Vec<usize>,
    inter: Vec<f64>,
    col_in: Vec<f64>,
    col_out: Vec<f64>,
    col_arg: Vec<u32>,
    row_vals: Vec<f64>,
    row_arg: Vec<u32>,
}

#[inline]
fn penalized(f: f64, a: f64, b: f64, d: f64) -> f64 {
    f - a * d * d - b * d
}

/// Core 1-D transform. `-inf` entries never become argmaxes unless the whole
/// input is `-inf`, in which case every output is `-inf` with argmax `p`.
fn transform_1d(
    f: &[f64],
    a: f64,
    b: f64,
    out: &mut [f64],
    arg: &mut [u32],
    hull: &mut Vec<usize>,
    inter: &mut Vec<f64>,
) {
    let n = f.len();
    hull.clear();
    inter.clear();
    // As lines in p (after dropping the shared -a p^2 - b p term), candidate q has
    // slope 2aq and intercept f[q] - a q^2 + b q; slopes increase with q.
    let intercept = |q: usize| {
        let qf = q as f64;
        f[q] - a * qf * qf + b * qf
    };
    for q in 0..n {
        if f[q] == f64::NEG_INFINITY {
            continue;
        }
        let cq = intercept(q);
        loop {
            let Some(&last) = hull.last() else {
                hull.push(q);
                inter.push(f64::NEG_INFINITY);
                break;
            };
            let cl = intercept(last);
            let x = (cl - cq) / (2.0 * a * (q - last) as f64);
            if x <= *inter.last().unwrap() {
                hull.pop();
                inter.pop();
            } else {
                hull.push(q);
                inter.push(x);
                break;
            }
        }
    }
    if hull.is_empty() {
        for p in 0..n {
            out[p] = f64::NEG_INFINITY;
            arg[p] = p as u32;
        }
        return;
    }
    let mut k = 0;
    for p in 0..n {
        let pf = p as f64;
        let mut q = hull[k];
        let mut v = penalized(f[q], a, b, pf - q as f64);
        while k + 1 < hull.len() {
            let q2 = hull[k + 1];
            let v2 = penalized(f[q2], a, b, pf - q2 as f64);
            if v2 > v {
                k += 1;
                q = q2;
                v = v2;
            } else {
                break;
            }
        }
        out[p] = v;
        arg[p] = q as u32;
    }
}

/// One-dimensional transform. Returns the transformed values and, per output
/// position, the source index attaining them.
pub fn gdt_1d(f: &[f64], a: f64, b: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    check_coeff(a)?;
    let n = f.len();
    let mut out = vec![0.0; n];
    let mut arg = vec![0u32; n];
    let (mut hull, mut inter) = (Vec::new(), Vec::new());
    transform_1d(f, a, b, &mut out, &mut arg, &mut hull, &mut inter);
    Ok((out, arg.into_iter().map(|v| v as usize).collect()))
}

/// Two-dimensional transform of a row-major `rows x cols` slice:
/// `max_{qy,qx} f[qy][qx] - wx2 dx^2 - wx1 dx - wy2 dy^2 - wy1 dy` with
/// `dx = x - qx`, `dy = y - qy`. Arg positions are `(qy, qx)`.
#[allow(clippy::too_many_arguments)]
pub fn gdt_2d(
    values: &[f64],
    rows: usize,
    cols: usize,
    wx2: f64,
    wx1: f64,
    wy2: f64,
    wy1: f64,
) -> Result<(Vec<f64>, Vec<(usize, usize)>)> {
    check_coeff(wx2)?;
    check_coeff(wy2)?;
    if values.len() != rows * cols {
        return Err(PoseError::InvalidArgument(format!(
            "{} values for a {rows}x{cols} slice",
            values.len()
        )));
    }
    let mut out = vec![0.0; rows * cols];
    let mut arg = vec![0u32; rows * cols];
    let mut s = Scratch::default();
    transform_2d(values, rows, cols, (wx2, wx1), (wy2, wy1), &mut out, &mut arg, &mut s);
    let pos = arg
        .into_iter()
        .map(|i| (i as usize / cols, i as usize % cols))
        .collect();
    Ok((out, pos))
}

/// Row pass then column pass. `arg` receives flattened source indices.
/// Coefficients must already be validated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn transform_2d(
    values: &[f64],
    rows: usize,
    cols: usize,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    out: &mut [f64],
    arg: &mut [u32],
    s: &mut Scratch,
) {
    s.row_vals.resize(rows * cols, 0.0);
    s.row_arg.resize(rows * cols, 0);
    for y in 0..rows {
        let r = y * cols..(y + 1) * cols;
        transform_1d(
            &values[r.clone()],
            ax,
            bx,
            &mut s.row_vals[r.clone()],
            &mut s.row_arg[r],
            &mut s.hull,
            &mut s.inter,
        );
    }
    s.col_in.resize(rows, 0.0);
    s.col_out.resize(rows, 0.0);
    s.col_arg.resize(rows, 0);
    for x in 0..cols {
        for y in 0..rows {
            s.col_in[y] = s.row_vals[y * cols + x];
        }
        transform_1d(
            &s.col_in,
            ay,
            by,
            &mut s.col_out,
            &mut s.col_arg,
            &mut s.hull,
            &mut s.inter,
        );
        for y in 0..rows {
            let qy = s.col_arg[y] as usize;
            out[y * cols + x] = s.col_out[y];
            arg[y * cols + x] = (qy * cols) as u32 + s.row_arg[qy * cols + x];
        }
    }
}

/// Coefficients of one axis of a displacement penalty `-w1 d - w2 d^2` with
/// `d = q - p - mu` (child at `q`, parent at `p`), rewritten in the transform's
/// variable `p - q` as `-a (p-q)^2 - b (p-q) + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct AxisPenalty {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AxisPenalty {
    pub fn new(w1: f64, w2: f64, mu: f64) -> Self {
        AxisPenalty {
            a: w2,
            b: 2.0 * w2 * mu - w1,
            c: w1 * mu - w2 * mu * mu,
        }
    }
}
