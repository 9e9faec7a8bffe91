//! Quality metrics, Bjøntegaard deltas and rate-distortion sweeps.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bitstream::StreamMode;
use crate::codec::{encode_baseline, prepare, Encoded, EncoderConfig};
use crate::dictionary::LfDictionary;
use crate::error::{Error, Result};
use crate::lf::{Channel, LightField, Plane};
use crate::par;

const PEAK: f64 = 255.0;

/// PSNR for a mean squared error; zero error gives `+inf`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

fn sq_err(a: &Plane, b: &Plane) -> u64 {
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum()
}

pub fn psnr_planes(a: &Plane, b: &Plane) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height), "plane sizes differ");
    psnr_from_mse(sq_err(a, b) as f64 / a.data.len() as f64)
}

/// Per-channel PSNR with the squared error pooled over every view in
/// `orig`'s mask.
pub fn psnr_lf(orig: &LightField, recon: &LightField) -> Result<[f64; 3]> {
    if !orig.same_geometry(recon) {
        return Err(Error::DimensionMismatch("light fields differ in geometry".into()));
    }
    let mut out = [0.0; 3];
    for c in Channel::ALL {
        let mut err = 0u64;
        let mut n = 0usize;
        for (s, t) in orig.valid_views() {
            err += sq_err(orig.plane(s, t, c), recon.plane(s, t, c));
            n += orig.plane(s, t, c).data.len();
        }
        out[c.index()] = if n == 0 { f64::NAN } else { psnr_from_mse(err as f64 / n as f64) };
    }
    Ok(out)
}

/// Weighted average `(6 Y + U + V) / 8`.
pub fn psnr_yuv(y: f64, u: f64, v: f64) -> f64 {
    (6.0 * y + u + v) / 8.0
}

/// One rate-distortion point with its section sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub q: u8,
    pub bpp: f64,
    pub psnr_y: f64,
    pub psnr_u: f64,
    pub psnr_v: f64,
    pub psnr_yuv: f64,
    pub total_bytes: usize,
    pub skv_bytes: usize,
    pub disparity_bytes: usize,
    pub residual_bytes: usize,
}

impl RdPoint {
    pub fn from_encoded(q: u8, e: &Encoded) -> Self {
        let a = &e.stats.accounting;
        RdPoint {
            q,
            bpp: a.bpp,
            psnr_y: e.stats.psnr[0],
            psnr_u: e.stats.psnr[1],
            psnr_v: e.stats.psnr[2],
            psnr_yuv: e.stats.psnr_yuv,
            total_bytes: a.total_bytes,
            skv_bytes: a.skv_bytes,
            disparity_bytes: a.disparity_bytes,
            residual_bytes: a.residual_bytes,
        }
    }
}

/// Sorts by rate and keeps only points that improve on every cheaper one.
pub fn clean_monotone(mut points: Vec<RdPoint>) -> Vec<RdPoint> {
    points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp).then(b.psnr_yuv.total_cmp(&a.psnr_yuv)));
    let mut out: Vec<RdPoint> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            Some(last) if p.bpp <= last.bpp || p.psnr_yuv <= last.psnr_yuv => {}
            _ => out.push(p),
        }
    }
    out
}

/// Encodes `lf` at each `q` (residual q in full mode, the single q in
/// baseline mode). The sparse approximation is built once and shared by all
/// full-mode points.
pub fn rd_sweep(
    lf: &LightField,
    dict: Option<&LfDictionary>,
    qs: &[u8],
    cfg: &EncoderConfig,
) -> Result<Vec<RdPoint>> {
    let points: Vec<Result<RdPoint>> = match cfg.mode {
        StreamMode::Full => {
            let dict = dict.ok_or_else(|| Error::invalid("full mode needs a dictionary"))?;
            let prepared = prepare(lf, dict, cfg)?;
            par::map_slice(qs, |&q| prepared.finish(q).map(|e| RdPoint::from_encoded(q, &e)))
        }
        StreamMode::Baseline => par::map_slice(qs, |&q| encode_baseline(lf, q).map(|e| RdPoint::from_encoded(q, &e))),
    };
    Ok(clean_monotone(points.into_iter().collect::<Result<Vec<_>>>()?))
}

pub fn write_csv(points: &[RdPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for p in points {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<RdPoint>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|p| p.map_err(csv_err)).collect()
}

/// Gnuplot-friendly columns: bpp, then PSNR Y U V YUV.
pub fn write_dat(points: &[RdPoint], path: &Path) -> Result<()> {
    let mut s = String::from("# bpp psnr_y psnr_u psnr_v psnr_yuv\n");
    for p in points {
        s.push_str(&format!("{} {} {} {} {}\n", p.bpp, p.psnr_y, p.psnr_u, p.psnr_v, p.psnr_yuv));
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("csv: {other:?}")),
    }
}

/// Bjøntegaard deltas of `test` against `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BdResult {
    /// Average PSNR gain of `test` at equal rate, dB.
    pub bd_psnr: f64,
    /// Average rate change of `test` at equal quality, percent.
    pub bd_rate: f64,
    /// Set when a cubic fit was ill-conditioned and piecewise-linear
    /// interpolation was used instead.
    pub linear_fallback: bool,
}

/// Largest acceptable ratio of singular values in the cubic fit.
const MAX_CONDITION: f64 = 1e10;

/// Least-squares cubic through `(x, y)`, in coefficients of
/// `((x - mid) / half)^k`. `None` if ill-conditioned.
fn fit_cubic(x: &[f64], y: &[f64]) -> Option<([f64; 4], f64, f64)> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    if !(half > 0.0) {
        return None;
    }
    let a = DMatrix::from_fn(x.len(), 4, |i, j| ((x[i] - mid) / half).powi(j as i32));
    let svd = a.svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 0.0) || smax / smin > MAX_CONDITION {
        return None;
    }
    let c = svd.solve(&DVector::from_column_slice(y), 0.0).ok()?;
    Some(([c[0], c[1], c[2], c[3]], mid, half))
}

/// Exact integral of a fitted cubic over `[a, b]`.
fn integrate_cubic((c, mid, half): &([f64; 4], f64, f64), a: f64, b: f64) -> f64 {
    let prim = |x: f64| {
        let u = (x - mid) / half;
        half * (c[0] * u + c[1] * u * u / 2.0 + c[2] * u.powi(3) / 3.0 + c[3] * u.powi(4) / 4.0)
    };
    prim(b) - prim(a)
}

/// Integral over `[a, b]` of the piecewise-linear interpolant of points
/// sorted by `x`, extended flat beyond the ends.
fn integrate_linear(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let at = |v: f64| {
        if v <= xs[0] {
            return ys[0];
        }
        for k in 1..xs.len() {
            if v <= xs[k] {
                let t = (v - xs[k - 1]) / (xs[k] - xs[k - 1]);
                return ys[k - 1] + t * (ys[k] - ys[k - 1]);
            }
        }
        ys[ys.len() - 1]
    };
    let mut knots: Vec<f64> = vec![a, b];
    knots.extend(xs.iter().copied().filter(|&v| v > a && v < b));
    knots.sort_by(f64::total_cmp);
    knots.windows(2).map(|w| (w[1] - w[0]) * (at(w[0]) + at(w[1])) / 2.0).sum()
}

/// Average of `test - anchor` over the overlap of their `x` ranges, using
/// cubic fits when both are well conditioned.
fn average_gap(xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> Result<(f64, bool)> {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = (min(xa).max(min(xb)), max(xa).min(max(xb)));
    if !(b > a) {
        return Err(Error::invalid("rate-distortion curves do not overlap"));
    }
    match (fit_cubic(xa, ya), fit_cubic(xb, yb)) {
        (Some(fa), Some(fb)) => Ok(((integrate_cubic(&fb, a, b) - integrate_cubic(&fa, a, b)) / (b - a), false)),
        _ => Ok(((integrate_linear(xb, yb, a, b) - integrate_linear(xa, ya, a, b)) / (b - a), true)),
    }
}

/// Bjøntegaard delta PSNR and delta rate on PSNR_YUV, with rates on a
/// log10 axis. Each curve needs at least four finite points.
pub fn bd_metrics(anchor: &[RdPoint], test: &[RdPoint]) -> Result<BdResult> {
    let split = |c: &[RdPoint]| -> Result<(Vec<f64>, Vec<f64>)> {
        if c.len() < 4 {
            return Err(Error::invalid("BD metrics need at least four points per curve"));
        }
        if c.iter().any(|p| !(p.bpp > 0.0) || !p.psnr_yuv.is_finite()) {
            return Err(Error::invalid("BD metrics need positive rates and finite PSNR"));
        }
        Ok((c.iter().map(|p| p.bpp.log10()).collect(), c.iter().map(|p| p.psnr_yuv).collect()))
    };
    let (ra, pa) = split(anchor)?;
    let (rb, pb) = split(test)?;
    let (bd_psnr, f1) = average_gap(&ra, &pa, &rb, &pb)?;
    let (log_gap, f2) = average_gap(&pa, &ra, &pb, &rb)?;
    Ok(BdResult {
        bd_psnr,
        bd_rate: (10f64.powf(log_gap) - 1.0) * 100.0,
        linear_fallback: f1 || f2,
    })
}
