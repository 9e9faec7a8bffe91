//! Perspective-shifted light field dictionary.
//!
//! A bank of 2D atoms, each stored on an extended square canvas, is turned into
//! light field atoms by translating the atom to every view of an 8x8 coding
//! region under a common unit disparity and concatenating the central crops.
//! Columns sharing a disparity form one segment; the full dictionary is the
//! concatenation of segments in ascending disparity order.

mod dct;
mod file;
mod ksvd;

pub use dct::dct_fallback_atoms;
pub use file::{load_lfd, read_lfd, save_lfd, write_lfd};
pub use ksvd::{atoms_from_canvases, extract_training_patches, train_ksvd, KsvdOutput, DEFAULT_SPARSITY};

use std::sync::OnceLock;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::par;

/// Views per side of a coding region.
pub const REGION_SIDE: usize = 8;
pub const REGION_VIEWS: usize = REGION_SIDE * REGION_SIDE;
pub const DEFAULT_PATCH: usize = 8;
pub const DEFAULT_ATOMS: usize = 400;
pub const DEFAULT_LEVELS: usize = 21;

/// The 21 unit disparities -3.0, -2.7, ..., 3.0, rounded to f32 precision as
/// stored in dictionary files.
pub fn default_disparity_grid() -> Vec<f64> {
    (0..DEFAULT_LEVELS)
        .map(|i| f64::from(((i as f64 - 10.0) * 3.0 / 10.0) as f32))
        .collect()
}

/// Canvas side needed to shift a `patch`-sized crop by every disparity in
/// `grid` across an 8x8 region: `patch + 2 * ceil(max|dp| * 3.5)`.
pub fn canvas_size_for(grid: &[f64], patch: usize) -> usize {
    let max_dp = grid.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let max_off = (REGION_SIDE as f64 - 1.0) / 2.0;
    patch + 2 * (max_dp * max_off).ceil() as usize
}

/// Horizontal (`h`) and vertical (`v`) disparity ratios of each view in an
/// 8x8 region relative to the region's center, row-major. `h` depends on the
/// view row only and `v` on the view column only.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl Lattice {
    #[inline]
    pub fn offset(&self, slot: usize) -> (f64, f64) {
        (self.h[slot], self.v[slot])
    }
}

pub fn lattice_offsets(rows: usize, cols: usize) -> Result<Lattice> {
    if rows != REGION_SIDE || cols != REGION_SIDE {
        return Err(Error::invalid(format!(
            "lattice is defined for 8x8 regions, got {rows}x{cols}"
        )));
    }
    let center = (REGION_SIDE as f64 - 1.0) / 2.0;
    let mut h = Vec::with_capacity(REGION_VIEWS);
    let mut v = Vec::with_capacity(REGION_VIEWS);
    for r in 0..rows {
        for c in 0..cols {
            h.push(r as f64 - center);
            v.push(c as f64 - center);
        }
    }
    Ok(Lattice { h, v })
}

/// Pixel shift `(dx, dy) = dp * (H(v), V(v))` of region view `(row, col)`.
pub fn shear_vector(dp: f64, view: (usize, usize)) -> (f64, f64) {
    let center = (REGION_SIDE as f64 - 1.0) / 2.0;
    (dp * (view.0 as f64 - center), dp * (view.1 as f64 - center))
}

/// A 2D atom on a square canvas. The central `patch x patch` crop has unit
/// norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom2D {
    pub size: usize,
    pub pixels: Vec<f64>,
}

impl Atom2D {
    pub fn new(size: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != size * size {
            return Err(Error::invalid("atom canvas is not square"));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("atom has non-finite samples"));
        }
        Ok(Atom2D { size, pixels })
    }

    pub fn central_crop(&self, patch: usize) -> Vec<f64> {
        let o = (self.size - patch) / 2;
        let mut out = Vec::with_capacity(patch * patch);
        for y in o..o + patch {
            out.extend_from_slice(&self.pixels[y * self.size + o..y * self.size + o + patch]);
        }
        out
    }

    /// Scales the canvas so the central crop has unit norm. Returns `false`
    /// (leaving the atom untouched) when the crop is numerically zero.
    pub fn normalize_crop(&mut self, patch: usize) -> bool {
        let n = crate::omp::norm(&self.central_crop(patch));
        if n <= 1e-12 {
            return false;
        }
        self.pixels.iter_mut().for_each(|v| *v /= n);
        true
    }

    fn quantized_f32(&self) -> Atom2D {
        Atom2D {
            size: self.size,
            pixels: self.pixels.iter().map(|&v| f64::from(v as f32)).collect(),
        }
    }
}

/// Samples the `patch x patch` window of `atom` centred on the canvas and
/// displaced by `shift`, with bilinear interpolation.
pub fn warp_crop(atom: &Atom2D, shift: (f64, f64), patch: usize) -> Result<Vec<f64>> {
    let margin = (atom.size - patch) as f64 / 2.0;
    let (dx, dy) = shift;
    if !(dx.abs() <= margin && dy.abs() <= margin) {
        return Err(Error::invalid(format!(
            "shift ({dx}, {dy}) exceeds canvas margin {margin}"
        )));
    }
    let m = atom.size;
    let o = (m - patch) / 2;
    let mut out = Vec::with_capacity(patch * patch);
    let fy0 = o as f64 + dy;
    let fx0 = o as f64 + dx;
    for y in 0..patch {
        let fy = fy0 + y as f64;
        let y0 = fy.floor();
        let ay = fy - y0;
        let y0 = y0 as usize;
        let y1 = (y0 + 1).min(m - 1);
        for x in 0..patch {
            let fx = fx0 + x as f64;
            let x0 = fx.floor();
            let ax = fx - x0;
            let x0 = x0 as usize;
            let x1 = (x0 + 1).min(m - 1);
            let p = &atom.pixels;
            let top = (1.0 - ax) * p[y0 * m + x0] + ax * p[y0 * m + x1];
            let bottom = (1.0 - ax) * p[y1 * m + x0] + ax * p[y1 * m + x1];
            out.push((1.0 - ay) * top + ay * bottom);
        }
    }
    Ok(out)
}

/// Light field atom for unit disparity `dp`: the atom warped to all 64 region
/// views in row-major order, concatenated, and scaled to unit norm.
pub fn synthesize_lf_atom(atom: &Atom2D, dp: f64, lattice: &Lattice, patch: usize) -> Result<Vec<f64>> {
    let mut col = Vec::with_capacity(REGION_VIEWS * patch * patch);
    for slot in 0..REGION_VIEWS {
        let (h, v) = lattice.offset(slot);
        col.extend(warp_crop(atom, (dp * h, dp * v), patch)?);
    }
    let n = crate::omp::norm(&col);
    if n > 0.0 {
        col.iter_mut().for_each(|v| *v /= n);
    }
    Ok(col)
}

/// The light field dictionary. Segments are synthesised on first use and
/// cached; their content is a pure function of the atoms and the grid.
#[derive(Debug)]
pub struct LfDictionary {
    atoms: Vec<Atom2D>,
    levels: Vec<f64>,
    patch: usize,
    lattice: Lattice,
    content_hash: u64,
    disparity_scale: f64,
    segments: Vec<OnceLock<Vec<f64>>>,
}

pub fn build_dictionary(atoms: Vec<Atom2D>, grid: Vec<f64>, patch: usize) -> Result<LfDictionary> {
    if atoms.is_empty() {
        return Err(Error::invalid("dictionary needs at least one atom"));
    }
    if grid.is_empty() || grid.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("disparity grid must be non-empty and finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("disparity grid must be strictly ascending"));
    }
    let size = atoms[0].size;
    if atoms.iter().any(|a| a.size != size) {
        return Err(Error::invalid("atoms have differing canvas sizes"));
    }
    if size < canvas_size_for(&grid, patch) || (size - patch) % 2 != 0 {
        return Err(Error::invalid(format!(
            "canvas {size} cannot hold patch {patch} under the grid's largest shift"
        )));
    }
    let atoms: Vec<Atom2D> = atoms.iter().map(Atom2D::quantized_f32).collect();
    let levels: Vec<f64> = grid.iter().map(|&d| f64::from(d as f32)).collect();
    let content_hash = content_hash(&atoms, &levels, patch);
    let segments = levels.iter().map(|_| OnceLock::new()).collect();
    Ok(LfDictionary {
        atoms,
        levels,
        patch,
        lattice: lattice_offsets(REGION_SIDE, REGION_SIDE)?,
        content_hash,
        disparity_scale: 1.0,
        segments,
    })
}

/// 64-bit digest over a canonical serialization: sizes, then levels and
/// atom samples quantized to a 1e-6 grid.
fn content_hash(atoms: &[Atom2D], levels: &[f64], patch: usize) -> u64 {
    let q = |v: f64| ((v * 1e6).round() as i64).to_le_bytes();
    let mut h = Sha256::new();
    h.update(b"LFD1");
    for n in [atoms.len(), atoms[0].size, patch, levels.len()] {
        h.update((n as u32).to_le_bytes());
    }
    for &l in levels {
        h.update(q(l));
    }
    for a in atoms {
        for &v in &a.pixels {
            h.update(q(v));
        }
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

impl LfDictionary {
    pub fn atoms(&self) -> &[Atom2D] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Unit disparities of the segments as stored (unscaled).
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn patch_size(&self) -> usize {
        self.patch
    }

    pub fn canvas_size(&self) -> usize {
        self.atoms[0].size
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn content_hash(&self) -> u64 {
        self.content_hash
    }

    /// Rows of a light field column: `patch^2 * 64`.
    pub fn column_len(&self) -> usize {
        self.patch * self.patch * REGION_VIEWS
    }

    /// Logical size of the full dictionary `(rows, atoms * levels)`.
    pub fn logical_dims(&self) -> (usize, usize) {
        (self.column_len(), self.atoms.len() * self.levels.len())
    }

    /// Disparity actually applied for segment `level`.
    pub fn effective_disparity(&self, level: usize) -> f64 {
        self.levels[level] * self.disparity_scale
    }

    pub fn disparity_scale(&self) -> f64 {
        self.disparity_scale
    }

    /// Same atoms and hash, with every segment's disparity multiplied by
    /// `factor`. Used for chroma planes, whose pixel pitch is doubled.
    pub fn scaled(&self, factor: f64) -> LfDictionary {
        LfDictionary {
            atoms: self.atoms.clone(),
            levels: self.levels.clone(),
            patch: self.patch,
            lattice: self.lattice.clone(),
            content_hash: self.content_hash,
            disparity_scale: self.disparity_scale * factor,
            segments: self.levels.iter().map(|_| OnceLock::new()).collect(),
        }
    }

    /// Column `atom` of segment `level`, synthesised directly.
    pub fn column(&self, level: usize, atom: usize) -> Vec<f64> {
        synthesize_lf_atom(&self.atoms[atom], self.effective_disparity(level), &self.lattice, self.patch)
            .expect("canvas margin validated at build time")
    }

    /// Segment `level` as a column-major `column_len x num_atoms` matrix.
    pub fn segment(&self, level: usize) -> &[f64] {
        self.segments[level].get_or_init(|| {
            par::map_range(self.atoms.len(), |k| self.column(level, k)).concat()
        })
    }

    /// Index of the level nearest to `dp` (ties go to the lower index).
    pub fn quantize_disparity(&self, dp: f64) -> usize {
        let mut best = 0;
        for (i, &l) in self.levels.iter().enumerate() {
            if (l - dp).abs() < (self.levels[best] - dp).abs() {
                best = i;
            }
        }
        best
    }
}
