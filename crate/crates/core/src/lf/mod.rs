//! Light field data model: a 2D grid of YUV 4:2:0 sub-view images.
//!
//! Views are addressed by angular coordinates `(s, t)`, both 0-based, stored
//! row-major with `s` as the row. Parallax along `s` moves content
//! horizontally in the image and parallax along `t` moves it vertically, which
//! is the convention the dictionary lattice and the disparity estimator share.

mod color;
mod io;
pub mod patch;

pub use color::{rgb_to_yuv, subsample_420, yuv_to_rgb};
pub use io::{load_lf, load_luma_image, load_lfraw, save_lf, save_lf_dir, save_lfraw, MANIFEST_FILE, MASK_FILE};
pub use patch::{assemble_overlap_average, extract_patch_stack, OverlapAccumulator, PatchGrid, ViewVector};

use crate::error::{Error, Result};

pub const BIT_DEPTH: u8 = 8;
/// Chroma subsampling code stored in containers: 1 = 4:2:0.
pub const CHROMA_420: u8 = 1;

/// Color channel of a plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Y = 0,
    U = 1,
    V = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Y, Channel::U, Channel::V];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_chroma(self) -> bool {
        self != Channel::Y
    }
}

/// An 8-bit image plane, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "plane {}x{} given {} samples",
                width,
                height,
                data.len()
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Plane {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Rounds and clamps real samples into a plane.
    pub fn from_f64(width: usize, height: usize, samples: &[f64]) -> Self {
        debug_assert_eq!(samples.len(), width * height);
        Plane {
            width,
            height,
            data: samples.iter().map(|&v| clamp_u8(v)).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Rounds half away from zero, then clamps to `[0, 255]`.
#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    let r = v.round();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Chroma plane dimensions for a luma plane of `width x height`.
pub fn chroma_dims(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(2), height.div_ceil(2))
}

/// One sub-view image: Y, U and V planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub planes: [Plane; 3],
}

impl View {
    pub fn new(y: Plane, u: Plane, v: Plane) -> Result<Self> {
        let (cw, ch) = chroma_dims(y.width, y.height);
        for p in [&u, &v] {
            if p.width != cw || p.height != ch {
                return Err(Error::DimensionMismatch(format!(
                    "chroma plane {}x{} for luma {}x{}",
                    p.width, p.height, y.width, y.height
                )));
            }
        }
        Ok(View { planes: [y, u, v] })
    }

    pub fn filled(width: usize, height: usize, yuv: [u8; 3]) -> Self {
        let (cw, ch) = chroma_dims(width, height);
        View {
            planes: [
                Plane::filled(width, height, yuv[0]),
                Plane::filled(cw, ch, yuv[1]),
                Plane::filled(cw, ch, yuv[2]),
            ],
        }
    }

    pub fn plane(&self, ch: Channel) -> &Plane {
        &self.planes[ch.index()]
    }

    pub fn plane_mut(&mut self, ch: Channel) -> &mut Plane {
        &mut self.planes[ch.index()]
    }
}

/// A 4D light field stored as `rows x cols` sub-views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightField {
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
    views: Vec<View>,
    valid: Vec<bool>,
}

impl LightField {
    pub fn new(
        rows: usize,
        cols: usize,
        views: Vec<View>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("empty angular grid".into()));
        }
        if views.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} views for a {}x{} grid",
                views.len(),
                rows,
                cols
            )));
        }
        if valid.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries for a {}x{} grid",
                valid.len(),
                rows,
                cols
            )));
        }
        let width = views[0].planes[0].width;
        let height = views[0].planes[0].height;
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch("empty view".into()));
        }
        for (i, v) in views.iter().enumerate() {
            if v.planes[0].width != width || v.planes[0].height != height {
                return Err(Error::DimensionMismatch(format!(
                    "view ({}, {}) is {}x{}, expected {}x{}",
                    i / cols,
                    i % cols,
                    v.planes[0].width,
                    v.planes[0].height,
                    width,
                    height
                )));
            }
        }
        Ok(LightField {
            rows,
            cols,
            width,
            height,
            views,
            valid,
        })
    }

    /// Builds a light field with the default evaluation mask.
    pub fn with_default_mask(rows: usize, cols: usize, views: Vec<View>) -> Result<Self> {
        Self::new(rows, cols, views, default_valid_mask(rows, cols))
    }

    pub fn uniform(rows: usize, cols: usize, width: usize, height: usize, yuv: [u8; 3]) -> Self {
        let views = vec![View::filled(width, height, yuv); rows * cols];
        Self::with_default_mask(rows, cols, views).expect("uniform light field is well formed")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane_dims(&self, ch: Channel) -> (usize, usize) {
        if ch.is_chroma() {
            chroma_dims(self.width, self.height)
        } else {
            (self.width, self.height)
        }
    }

    #[inline]
    pub fn index(&self, s: usize, t: usize) -> usize {
        s * self.cols + t
    }

    pub fn view(&self, s: usize, t: usize) -> &View {
        &self.views[self.index(s, t)]
    }

    pub fn view_mut(&mut self, s: usize, t: usize) -> &mut View {
        let i = self.index(s, t);
        &mut self.views[i]
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn into_views(self) -> Vec<View> {
        self.views
    }

    pub fn plane(&self, s: usize, t: usize, ch: Channel) -> &Plane {
        self.view(s, t).plane(ch)
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, s: usize, t: usize) -> bool {
        self.valid[self.index(s, t)]
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid view coordinates in row-major order.
    pub fn valid_views(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows * self.cols)
            .filter(|&i| self.valid[i])
            .map(|i| (i / self.cols, i % self.cols))
    }

    pub fn same_geometry(&self, other: &LightField) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.width == other.width
            && self.height == other.height
    }
}

/// Evaluation mask: for the 15x15 grid the outer ring and the four corners of
/// the remaining 13x13 block are excluded (165 views); other grids keep all.
pub fn default_valid_mask(rows: usize, cols: usize) -> Vec<bool> {
    if rows == 15 && cols == 15 {
        let mut mask = vec![false; rows * cols];
        for s in 1..14 {
            for t in 1..14 {
                let corner = (s == 1 || s == 13) && (t == 1 || t == 13);
                mask[s * cols + t] = !corner;
            }
        }
        mask
    } else {
        vec![true; rows * cols]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mask_has_165_views() {
        let m = default_valid_mask(15, 15);
        assert_eq!(m.iter().filter(|&&v| v).count(), 165);
        assert!(!m[0]);
        assert!(!m[15 + 1]);
        assert!(m[7 * 15 + 7]);
        assert!(m[15 + 2]);
    }

    #[test]
    fn degenerate_grid_is_all_valid() {
        let lf = LightField::uniform(1, 1, 4, 4, [1, 2, 3]);
        assert_eq!(lf.valid_mask(), &[true]);
    }

    #[test]
    fn chroma_dims_round_up() {
        assert_eq!(chroma_dims(624, 432), (312, 216));
        assert_eq!(chroma_dims(7, 5), (4, 3));
    }

    #[test]
    fn mismatched_views_are_rejected() {
        let a = View::filled(8, 8, [0; 3]);
        let b = View::filled(8, 6, [0; 3]);
        let err = LightField::with_default_mask(1, 2, vec![a, b]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn clamp_rounds_half_away() {
        assert_eq!(clamp_u8(2.5), 3);
        assert_eq!(clamp_u8(-0.4), 0);
        assert_eq!(clamp_u8(300.0), 255);
    }
}
