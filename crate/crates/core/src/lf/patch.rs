//! Overlapping patch decomposition and overlap-average reassembly.

use super::Plane;
use crate::error::{Error, Result};

/// Patch origins covering a `width x height` plane with a fixed stride. The
/// final row and column of origins are clamped so every patch lies inside the
/// plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub width: usize,
    pub height: usize,
    pub patch_size: usize,
    pub stride: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

fn axis_origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = len - patch;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 || stride == 0 || stride > patch_size {
            return Err(Error::invalid(format!(
                "stride {stride} must be in 1..={patch_size}"
            )));
        }
        if width < patch_size || height < patch_size {
            return Err(Error::invalid(format!(
                "plane {width}x{height} is smaller than patch {patch_size}"
            )));
        }
        Ok(PatchGrid {
            width,
            height,
            patch_size,
            stride,
            xs: axis_origins(width, patch_size, stride),
            ys: axis_origins(height, patch_size, stride),
        })
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xs(&self) -> &[usize] {
        &self.xs
    }

    pub fn ys(&self) -> &[usize] {
        &self.ys
    }

    /// Origin `(x, y)` of patch `i`; patches are ordered row by row.
    pub fn origin(&self, i: usize) -> (usize, usize) {
        (self.xs[i % self.nx()], self.ys[i / self.nx()])
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ys
            .iter()
            .flat_map(move |&y| self.xs.iter().map(move |&x| (x, y)))
    }

    /// Per-pixel count of covering patches.
    pub fn coverage(&self) -> Vec<u32> {
        let mut w = vec![0u32; self.width * self.height];
        for (x0, y0) in self.origins() {
            for y in y0..y0 + self.patch_size {
                for x in x0..x0 + self.patch_size {
                    w[y * self.width + x] += 1;
                }
            }
        }
        w
    }

    /// Index of the patch whose origin is nearest to `(x, y)` on each axis.
    pub fn nearest_patch(&self, x: f64, y: f64) -> usize {
        fn nearest(axis: &[usize], v: f64) -> usize {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, &o) in axis.iter().enumerate() {
                let d = (o as f64 - v).abs();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        }
        nearest(&self.ys, y) * self.nx() + nearest(&self.xs, x)
    }
}

/// A patch location's samples across all views of a coding region, view-major
/// then row-major within the patch.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewVector {
    pub region_id: usize,
    pub data: Vec<f64>,
}

/// Concatenates the `patch_size x patch_size` block at `origin` from every
/// plane, in the given plane order.
pub fn extract_patch_stack(
    planes: &[&Plane],
    region_id: usize,
    origin: (usize, usize),
    patch_size: usize,
) -> Result<ViewVector> {
    let (x0, y0) = origin;
    let mut data = Vec::with_capacity(planes.len() * patch_size * patch_size);
    for p in planes {
        if x0 + patch_size > p.width || y0 + patch_size > p.height {
            return Err(Error::invalid(format!(
                "patch at ({x0}, {y0}) exceeds {}x{} plane",
                p.width, p.height
            )));
        }
        for y in y0..y0 + patch_size {
            let row = &p.data[y * p.width + x0..y * p.width + x0 + patch_size];
            data.extend(row.iter().map(|&v| f64::from(v)));
        }
    }
    Ok(ViewVector { region_id, data })
}

/// Streaming form of [`assemble_overlap_average`]: patch stacks are summed
/// into per-view accumulators in the order they are added.
#[derive(Debug, Clone)]
pub struct OverlapAccumulator {
    width: usize,
    height: usize,
    patch: usize,
    acc: Vec<Vec<f64>>,
    count: Vec<u32>,
}

impl OverlapAccumulator {
    pub fn new(grid: &PatchGrid, n_views: usize) -> Self {
        let n = grid.width * grid.height;
        OverlapAccumulator {
            width: grid.width,
            height: grid.height,
            patch: grid.patch_size,
            acc: vec![vec![0.0; n]; n_views],
            count: vec![0; n],
        }
    }

    pub fn add(&mut self, origin: (usize, usize), data: &[f64]) -> Result<()> {
        let (w, h, p) = (self.width, self.height, self.patch);
        let (x0, y0) = origin;
        if data.len() != self.acc.len() * p * p {
            return Err(Error::invalid(format!(
                "patch stack has {} samples, expected {}",
                data.len(),
                self.acc.len() * p * p
            )));
        }
        if x0 + p > w || y0 + p > h {
            return Err(Error::invalid(format!("patch at ({x0}, {y0}) out of bounds")));
        }
        for (v, img) in self.acc.iter_mut().enumerate() {
            let block = &data[v * p * p..(v + 1) * p * p];
            for dy in 0..p {
                let row = (y0 + dy) * w + x0;
                for dx in 0..p {
                    img[row + dx] += block[dy * p + dx];
                }
            }
        }
        for dy in 0..p {
            for dx in 0..p {
                self.count[(y0 + dy) * w + x0 + dx] += 1;
            }
        }
        Ok(())
    }

    /// Per-view averages. Fails if any pixel received no patch.
    pub fn finish(mut self) -> Result<Vec<Vec<f64>>> {
        if let Some(i) = self.count.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!(
                "pixel ({}, {}) is not covered by any patch",
                i % self.width,
                i / self.width
            )));
        }
        for img in &mut self.acc {
            for (v, &c) in img.iter_mut().zip(&self.count) {
                *v /= f64::from(c);
            }
        }
        Ok(self.acc)
    }
}

/// Averages overlapping patch stacks into `n_views` images. Contributions are
/// summed in the order given, so identical input produces identical bits.
pub fn assemble_overlap_average(
    patches: &[((usize, usize), &[f64])],
    grid: &PatchGrid,
    n_views: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut acc = OverlapAccumulator::new(grid, n_views);
    for &(origin, data) in patches {
        acc.add(origin, data)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origins_are_clamped_to_bounds() {
        let g = PatchGrid::new(18, 8, 8, 4).unwrap();
        assert_eq!(g.xs(), &[0, 4, 8, 10]);
        assert_eq!(g.ys(), &[0]);
        assert!(g.coverage().iter().all(|&c| c >= 1));
    }

    #[test]
    fn stride_must_not_exceed_patch() {
        assert!(PatchGrid::new(16, 16, 8, 9).is_err());
        assert!(PatchGrid::new(7, 16, 8, 4).is_err());
    }

    #[test]
    fn constant_patches_assemble_to_constant() {
        let g = PatchGrid::new(13, 11, 8, 3).unwrap();
        let data = vec![42.5; 2 * 64];
        let patches: Vec<_> = g.origins().map(|o| (o, data.as_slice())).collect();
        let out = assemble_overlap_average(&patches, &g, 2).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 42.5));
    }

    #[test]
    fn interior_coverage_matches_brute_force() {
        let g = PatchGrid::new(16, 16, 8, 4).unwrap();
        let cov = g.coverage();
        for y in 0..16 {
            for x in 0..16 {
                let brute = g
                    .origins()
                    .filter(|&(ox, oy)| (ox..ox + 8).contains(&x) && (oy..oy + 8).contains(&y))
                    .count() as u32;
                assert_eq!(cov[y * 16 + x], brute);
            }
        }
        assert_eq!(cov[8 * 16 + 8], 4);
    }

    #[test]
    fn uncovered_pixel_is_an_error() {
        let g = PatchGrid::new(16, 8, 8, 8).unwrap();
        let data = vec![0.0; 64];
        let patches = vec![((0, 0), data.as_slice())];
        assert!(assemble_overlap_average(&patches, &g, 1).is_err());
    }

    #[test]
    fn extract_is_view_major_row_major() {
        let a = Plane::new(10, 9, (0..90).map(|v| v as u8).collect()).unwrap();
        let b = Plane::filled(10, 9, 200);
        let v = extract_patch_stack(&[&a, &b], 0, (1, 1), 8).unwrap();
        assert_eq!(v.data.len(), 128);
        assert_eq!(v.data[0], 11.0);
        assert_eq!(v.data[8], 21.0);
        assert!(v.data[64..].iter().all(|&x| x == 200.0));
        assert!(extract_patch_stack(&[&a], 0, (3, 0), 8).is_err());
    }
}
