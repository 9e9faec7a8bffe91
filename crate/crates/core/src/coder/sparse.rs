use std::sync::OnceLock;

use super::{regions_with_layout, skv_extractor, CodingRegion, SkvLayout, GRID_SIDE};
use crate::dictionary::{LfDictionary, REGION_VIEWS};
use crate::disparity::DisparityMap;
use crate::error::{Error, Result};
use crate::lf::{chroma_dims, Channel, LightField, OverlapAccumulator, PatchGrid, Plane, View};
use crate::omp::{self, ColumnMatrix};
use crate::par;

/// Mid-gray offset removed before pursuit and restored afterwards.
const MID_GRAY: f64 = 128.0;

/// Patches reconstructed per parallel batch before accumulation.
const BATCH: usize = 256;

/// Sparse coding parameters shared by encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoderParams {
    /// Per-sample RMS error target on the 0..255 scale.
    pub epsilon: f64,
    pub max_coeffs: usize,
    pub stride: usize,
}

impl Default for CoderParams {
    fn default() -> Self {
        CoderParams {
            epsilon: 5.0,
            max_coeffs: 30,
            stride: 4,
        }
    }
}

/// One segment cut down to the key-view rows, each column renormalized.
/// `scale[k]` is the factor applied to column `k` to reach unit norm on the
/// selected rows; the same factor scales the full column at reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSegment {
    pub level: usize,
    pub rows: usize,
    pub matrix: Vec<f64>,
    pub scale: Vec<f64>,
}

impl RestrictedSegment {
    pub fn as_matrix(&self) -> ColumnMatrix<'_> {
        ColumnMatrix::new(self.rows, self.scale.len(), &self.matrix)
    }
}

pub fn restrict_segment(dict: &LfDictionary, level: usize, slots: &[usize]) -> RestrictedSegment {
    let full = dict.segment(level);
    let len = dict.column_len();
    let area = dict.patch_size() * dict.patch_size();
    let rows = slots.len() * area;
    let mut matrix = Vec::with_capacity(rows * dict.num_atoms());
    let mut scale = Vec::with_capacity(dict.num_atoms());
    for k in 0..dict.num_atoms() {
        let col = &full[k * len..(k + 1) * len];
        let start = matrix.len();
        for &s in slots {
            matrix.extend_from_slice(&col[s * area..(s + 1) * area]);
        }
        let n = omp::norm(&matrix[start..]);
        let f = if n > 0.0 { 1.0 / n } else { 0.0 };
        matrix[start..].iter_mut().for_each(|v| *v *= f);
        scale.push(f);
    }
    RestrictedSegment { level, rows, matrix, scale }
}

/// Pursuit result for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub level: u16,
    pub atoms: Vec<usize>,
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
}

/// Per-patch plans of one region and channel, in patch order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparsePlan {
    pub entries: Vec<PlanEntry>,
}

/// OMP of a key-view measurement over one restricted segment, stopping at
/// `epsilon * sqrt(dim)` or `max_coeffs` atoms.
pub fn omp_segment(k: &[f64], seg: &RestrictedSegment, epsilon: f64, max_coeffs: usize) -> PlanEntry {
    let tol = epsilon * (k.len() as f64).sqrt();
    let out = omp::omp(seg.as_matrix(), k, tol, max_coeffs);
    PlanEntry {
        level: seg.level as u16,
        atoms: out.atoms,
        coeffs: out.coeffs,
        residual_norm: out.residual_norm,
    }
}

/// Full patch stack (all 64 views) of a plan entry, mid-gray restored.
fn reconstruct(entry: &PlanEntry, seg: &RestrictedSegment, dict: &LfDictionary) -> Vec<f64> {
    let len = dict.column_len();
    let full = dict.segment(seg.level);
    let mut out = vec![0.0; len];
    for (&k, &c) in entry.atoms.iter().zip(&entry.coeffs) {
        let a = c * seg.scale[k];
        for (o, &v) in out.iter_mut().zip(&full[k * len..(k + 1) * len]) {
            *o += a * v;
        }
    }
    out.iter_mut().for_each(|v| *v += MID_GRAY);
    out
}

/// Reconstructs all 64 views of one region and channel from the region's
/// key-view planes (in slot order) and one disparity level per patch.
pub fn approximate_region(
    skv_planes: &[&Plane],
    region: &CodingRegion,
    dict: &LfDictionary,
    levels: &[u16],
    grid: &PatchGrid,
    params: &CoderParams,
) -> Result<(SparsePlan, Vec<Plane>)> {
    let slots = skv_extractor(region);
    if skv_planes.len() != slots.len() {
        return Err(Error::invalid("one key-view plane per extractor slot is required"));
    }
    if levels.len() != grid.len() {
        return Err(Error::invalid(format!("{} levels for {} patches", levels.len(), grid.len())));
    }
    if levels.iter().any(|&l| usize::from(l) >= dict.num_levels()) {
        return Err(Error::corrupt("patch disparity level outside the dictionary grid"));
    }
    if grid.patch_size != dict.patch_size() {
        return Err(Error::invalid("patch grid and dictionary disagree on patch size"));
    }
    if skv_planes.iter().any(|p| (p.width, p.height) != (grid.width, grid.height)) {
        return Err(Error::DimensionMismatch("key-view plane does not match the patch grid".into()));
    }

    let segs: Vec<OnceLock<RestrictedSegment>> = (0..dict.num_levels()).map(|_| OnceLock::new()).collect();
    let seg = |l: u16| segs[usize::from(l)].get_or_init(|| restrict_segment(dict, usize::from(l), &slots));

    let p = grid.patch_size;
    let entries = par::map_range(grid.len(), |i| {
        let (x0, y0) = grid.origin(i);
        let mut k = Vec::with_capacity(skv_planes.len() * p * p);
        for plane in skv_planes {
            for y in y0..y0 + p {
                k.extend(plane.data[y * plane.width + x0..y * plane.width + x0 + p].iter().map(|&v| f64::from(v) - MID_GRAY));
            }
        }
        omp_segment(&k, seg(levels[i]), params.epsilon, params.max_coeffs)
    });

    let mut acc = OverlapAccumulator::new(grid, REGION_VIEWS);
    for start in (0..grid.len()).step_by(BATCH) {
        let end = (start + BATCH).min(grid.len());
        let stacks = par::map_range(end - start, |j| reconstruct(&entries[start + j], seg(levels[start + j]), dict));
        for (j, stack) in stacks.iter().enumerate() {
            acc.add(grid.origin(start + j), stack)?;
        }
    }
    let planes = acc
        .finish()?
        .iter()
        .map(|img| Plane::from_f64(grid.width, grid.height, img))
        .collect();
    Ok((SparsePlan { entries }, planes))
}

/// Averages the regions' reconstructions into the full grid. Views shared by
/// several regions take the integer mean `(sum + n/2) / n`.
pub fn stitch_regions(regions: &[CodingRegion], recon: &[Vec<Plane>], rows: usize, cols: usize) -> Result<Vec<Plane>> {
    if regions.len() != recon.len() || recon.iter().any(|r| r.len() != REGION_VIEWS) {
        return Err(Error::invalid("one 64-view reconstruction per region is required"));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for s in 0..rows {
        for t in 0..cols {
            let parts: Vec<&Plane> = regions
                .iter()
                .zip(recon)
                .filter_map(|(r, planes)| r.slot((s, t)).map(|k| &planes[k]))
                .collect();
            let Some(first) = parts.first() else {
                return Err(Error::invalid(format!("view ({s}, {t}) is outside every region")));
            };
            let n = parts.len() as u32;
            let data = (0..first.data.len())
                .map(|i| {
                    let sum: u32 = parts.iter().map(|p| u32::from(p.data[i])).sum();
                    ((sum + n / 2) / n) as u8
                })
                .collect();
            out.push(Plane::new(first.width, first.height, data)?);
        }
    }
    Ok(out)
}

/// Disparity level per patch of `target`, read from the luma map at the
/// nearest luma patch. `ratio` is the luma-to-target pixel pitch (2 for
/// 4:2:0 chroma, 1 for luma).
pub fn patch_levels(map: &DisparityMap, luma: &PatchGrid, target: &PatchGrid, ratio: usize) -> Result<Vec<u16>> {
    if (map.nx, map.ny) != (luma.nx(), luma.ny()) {
        return Err(Error::corrupt(format!(
            "disparity map is {}x{}, patch grid is {}x{}",
            map.nx,
            map.ny,
            luma.nx(),
            luma.ny()
        )));
    }
    if ratio == 1 && target == luma {
        return Ok(map.levels.clone());
    }
    let half = target.patch_size as f64 / 2.0;
    let lhalf = luma.patch_size as f64 / 2.0;
    Ok(target
        .origins()
        .map(|(x, y)| {
            let cx = (x as f64 + half) * ratio as f64 - lhalf;
            let cy = (y as f64 + half) * ratio as f64 - lhalf;
            map.levels[luma.nearest_patch(cx, cy)]
        })
        .collect())
}

/// Reconstructs every view of a 15x15 light field from the five decoded key
/// views (in layout order) and the decoded disparity map. Chroma planes use
/// `chroma_dict`, the luma dictionary with disparities halved.
pub fn approximate_lf(
    skvs: &[View],
    layout: &SkvLayout,
    dict: &LfDictionary,
    chroma_dict: &LfDictionary,
    map: &DisparityMap,
    params: &CoderParams,
) -> Result<LightField> {
    if skvs.len() != layout.views.len() {
        return Err(Error::invalid("one decoded view per key-view position is required"));
    }
    let regions = regions_with_layout(GRID_SIDE, GRID_SIDE, layout)?;
    let (w, h) = (skvs[0].planes[0].width, skvs[0].planes[0].height);
    let (cw, ch) = chroma_dims(w, h);
    let patch = dict.patch_size();
    let luma = PatchGrid::new(w, h, patch, params.stride)?;
    let chroma = PatchGrid::new(cw, ch, patch, params.stride)?;
    let luma_levels = patch_levels(map, &luma, &luma, 1)?;
    let chroma_levels = patch_levels(map, &luma, &chroma, 2)?;

    let mut channels: Vec<Vec<Plane>> = Vec::with_capacity(3);
    for c in Channel::ALL {
        let (d, grid, levels) = if c.is_chroma() {
            (chroma_dict, &chroma, &chroma_levels)
        } else {
            (dict, &luma, &luma_levels)
        };
        let mut per_region = Vec::with_capacity(4);
        for r in &regions {
            let planes: Vec<&Plane> = r
                .skv_ids
                .iter()
                .map(|&v| skvs[layout.position(v).expect("region key view is in the layout")].plane(c))
                .collect();
            per_region.push(approximate_region(&planes, r, d, levels, grid, params)?.1);
        }
        channels.push(stitch_regions(&regions, &per_region, GRID_SIDE, GRID_SIDE)?);
    }
    let [ys, us, vs]: [Vec<Plane>; 3] = channels.try_into().expect("three channels");
    let views = ys
        .into_iter()
        .zip(us)
        .zip(vs)
        .map(|((y, u), v)| View::new(y, u, v))
        .collect::<Result<Vec<_>>>()?;
    LightField::with_default_mask(GRID_SIDE, GRID_SIDE, views)
}
