//! Per-patch disparity estimation by shift-and-compare against the center
//! view.
//!
//! For each candidate unit disparity the center luma view is shifted to every
//! other valid view, the absolute differences are summed over views and box
//! aggregated, and each pixel takes the cheapest level. Pixel decisions are
//! pooled into one level per patch and cleaned with a median filter.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lf::{Channel, LightField, PatchGrid, Plane};
use crate::par;

/// Guards the confidence ratio against empty costs.
const CONF_DELTA: f64 = 1e-6;

/// Default aggregation radius (5x5 box).
pub const DEFAULT_RADIUS: usize = 2;

/// Quantized disparity per patch origin, raster order over the patch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub nx: usize,
    pub ny: usize,
    pub levels: Vec<u16>,
    /// Mean pixel confidence per patch. Decoded maps carry zeros.
    pub confidence: Vec<f64>,
    pub grid: Vec<f64>,
}

impl DisparityMap {
    /// A map with every patch at `level`.
    pub fn constant(nx: usize, ny: usize, level: u16, grid: Vec<f64>) -> Self {
        DisparityMap {
            nx,
            ny,
            levels: vec![level; nx * ny],
            confidence: vec![1.0; nx * ny],
            grid,
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn disparity(&self, patch: usize) -> f64 {
        self.grid[usize::from(self.levels[patch])]
    }
}

/// Aggregated matching cost, level-major: `data[l * w * h + y * w + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<f64>,
}

impl CostVolume {
    #[inline]
    pub fn at(&self, level: usize, x: usize, y: usize) -> f64 {
        self.data[(level * self.height + y) * self.width + x]
    }

    pub fn slice(&self, level: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[level * n..(level + 1) * n]
    }
}

/// Pixel-level winner-take-all decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDisparity {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<u16>,
    pub confidence: Vec<f64>,
}

/// Bilinear sample with coordinates clamped to the plane.
#[inline]
fn sample_clamped(p: &Plane, x: f64, y: f64) -> f64 {
    let fx = x.clamp(0.0, (p.width - 1) as f64);
    let fy = y.clamp(0.0, (p.height - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(p.width - 1), (y0 + 1).min(p.height - 1));
    let (a, b) = (fx - x0 as f64, fy - y0 as f64);
    let g = |x: usize, y: usize| f64::from(p.get(x, y));
    (1.0 - b) * ((1.0 - a) * g(x0, y0) + a * g(x1, y0)) + b * ((1.0 - a) * g(x0, y1) + a * g(x1, y1))
}

/// Sum over a `(2r+1)^2` window truncated at the borders.
fn box_sum(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let (a, b) = (x.saturating_sub(r), (x + r).min(w - 1));
            rows[y * w + x] = line[a..=b].iter().sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (a, b) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            let mut s = 0.0;
            for yy in a..=b {
                s += rows[yy * w + x];
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Angular center of the grid.
pub fn center_view(lf: &LightField) -> (usize, usize) {
    (lf.rows() / 2, lf.cols() / 2)
}

/// Matching cost of every luma pixel at every grid level, over all valid
/// views other than the center.
pub fn build_cost_volume(lf: &LightField, grid: &[f64], radius: usize) -> Result<CostVolume> {
    if grid.is_empty() {
        return Err(Error::invalid("empty disparity grid"));
    }
    let (cs, ct) = center_view(lf);
    let center = lf.plane(cs, ct, Channel::Y);
    let (w, h) = (lf.width(), lf.height());
    let others: Vec<(usize, usize)> = lf.valid_views().filter(|&v| v != (cs, ct)).collect();

    let slices = par::map_slice(grid, |&dp| {
        let mut cost = vec![0.0; w * h];
        for &(s, t) in &others {
            let view = lf.plane(s, t, Channel::Y);
            let dx = dp * (s as f64 - cs as f64);
            let dy = dp * (t as f64 - ct as f64);
            for y in 0..h {
                for x in 0..w {
                    let pred = sample_clamped(center, x as f64 + dx, y as f64 + dy);
                    cost[y * w + x] += (f64::from(view.get(x, y)) - pred).abs();
                }
            }
        }
        box_sum(&cost, w, h, radius)
    });
    Ok(CostVolume {
        width: w,
        height: h,
        levels: grid.len(),
        data: slices.concat(),
    })
}

/// Cheapest level per pixel (ties to the lower index) with confidence
/// `(c2 - c1) / (c2 + delta)`, where `c2` is the best cost among levels not
/// adjacent to the winner.
pub fn winner_take_all(cv: &CostVolume) -> PixelDisparity {
    let n = cv.width * cv.height;
    let mut levels = vec![0u16; n];
    let mut confidence = vec![0.0; n];
    for i in 0..n {
        let c = |l: usize| cv.data[l * n + i];
        let mut best = 0;
        for l in 1..cv.levels {
            if c(l) < c(best) {
                best = l;
            }
        }
        let far = (0..cv.levels).filter(|&l| l.abs_diff(best) > 1).map(c);
        let near = (0..cv.levels).filter(|&l| l != best).map(c);
        let second = far.fold(f64::INFINITY, f64::min);
        let second = if second.is_finite() { second } else { near.fold(f64::INFINITY, f64::min) };
        levels[i] = best as u16;
        confidence[i] = if second.is_finite() {
            ((second - c(best)) / (second + CONF_DELTA)).clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    PixelDisparity {
        width: cv.width,
        height: cv.height,
        levels,
        confidence,
    }
}

/// Confidence-weighted mode of the pixel levels inside each patch.
pub fn to_patch_map(pix: &PixelDisparity, patches: &PatchGrid, grid: &[f64]) -> Result<DisparityMap> {
    if (patches.width, patches.height) != (pix.width, pix.height) {
        return Err(Error::DimensionMismatch("patch grid does not match the disparity plane".into()));
    }
    let p = patches.patch_size;
    let out = par::map_range(patches.len(), |i| {
        let (x0, y0) = patches.origin(i);
        let mut weight = vec![0.0; grid.len()];
        let mut count = vec![0usize; grid.len()];
        let mut conf = 0.0;
        for y in y0..y0 + p {
            for x in x0..x0 + p {
                let j = y * pix.width + x;
                let l = usize::from(pix.levels[j]);
                weight[l] += pix.confidence[j];
                count[l] += 1;
                conf += pix.confidence[j];
            }
        }
        let mode = if weight.iter().any(|&w| w > 0.0) {
            argmax(&weight)
        } else {
            argmax(&count.iter().map(|&c| c as f64).collect::<Vec<_>>())
        };
        (mode as u16, conf / (p * p) as f64)
    });
    Ok(DisparityMap {
        nx: patches.nx(),
        ny: patches.ny(),
        levels: out.iter().map(|o| o.0).collect(),
        confidence: out.iter().map(|o| o.1).collect(),
        grid: grid.to_vec(),
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Median of the level indices over a `(2r+1)^2` neighbourhood with
/// replicated borders. Confidence is carried over unchanged.
pub fn median_filter_levels(map: &DisparityMap, radius: usize) -> DisparityMap {
    let (nx, ny) = (map.nx, map.ny);
    let r = radius as isize;
    let mut levels = Vec::with_capacity(map.levels.len());
    let mut win = Vec::with_capacity((2 * radius + 1).pow(2));
    for y in 0..ny as isize {
        for x in 0..nx as isize {
            win.clear();
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, ny as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, nx as isize - 1) as usize;
                    win.push(map.levels[yy * nx + xx]);
                }
            }
            win.sort_unstable();
            levels.push(win[win.len() / 2]);
        }
    }
    DisparityMap { levels, ..map.clone() }
}

/// Full estimator: cost volume, winner-take-all, patch pooling, 3x3 median.
pub fn estimate_disparity(lf: &LightField, grid: &[f64], patches: &PatchGrid, radius: usize) -> Result<DisparityMap> {
    let cv = build_cost_volume(lf, grid, radius)?;
    let pix = winner_take_all(&cv);
    let map = to_patch_map(&pix, patches, grid)?;
    Ok(median_filter_levels(&map, 1))
}

/// Binary PGM (P5) writer; 16-bit samples are stored big-endian.
pub fn write_pgm(path: &Path, width: usize, height: usize, maxval: u16, samples: &[u16]) -> Result<()> {
    if samples.len() != width * height || maxval == 0 {
        return Err(Error::invalid("pgm sample count or maxval"));
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P5\n{width} {height}\n{maxval}\n")?;
    for &v in samples {
        if maxval < 256 {
            out.write_all(&[v.min(maxval) as u8])?;
        } else {
            out.write_all(&v.min(maxval).to_be_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `<stem>_levels.pgm` (raw level indices) and `<stem>_confidence.pgm`
/// (confidence x 255) for a patch map.
pub fn dump_map(map: &DisparityMap, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let maxval = (map.grid.len().saturating_sub(1)).max(1) as u16;
    write_pgm(&dir.join(format!("{stem}_levels.pgm")), map.nx, map.ny, maxval, &map.levels)?;
    let conf: Vec<u16> = map.confidence.iter().map(|&c| (c * 255.0).round().clamp(0.0, 255.0) as u16).collect();
    write_pgm(&dir.join(format!("{stem}_confidence.pgm")), map.nx, map.ny, 255, &conf)
}
