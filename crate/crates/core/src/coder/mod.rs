//! Coding regions, key-view layout and disparity-guided sparse
//! reconstruction.
//!
//! A 15x15 light field is split into four 8x8 angular regions that share the
//! middle row and column. Five key views sit on those shared lines (the
//! center plus four cross positions), so every region sees exactly three of
//! them. Each region is reconstructed from its three key views alone.

mod sparse;

pub use sparse::{
    approximate_lf, approximate_region, omp_segment, patch_levels, restrict_segment, stitch_regions,
    CoderParams, PlanEntry, RestrictedSegment, SparsePlan,
};

use crate::dictionary::{REGION_SIDE, REGION_VIEWS};
use crate::error::{Error, Result};

/// Angular size the region layout is defined for.
pub const GRID_SIDE: usize = 15;

/// One 8x8 angular window, 0-based and half-open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodingRegion {
    pub id: usize,
    pub row0: usize,
    pub col0: usize,
    /// Global coordinates of the key views inside the window, in slot order.
    pub skv_ids: Vec<(usize, usize)>,
}

impl CodingRegion {
    pub fn contains(&self, (s, t): (usize, usize)) -> bool {
        (self.row0..self.row0 + REGION_SIDE).contains(&s) && (self.col0..self.col0 + REGION_SIDE).contains(&t)
    }

    /// Local slot (row-major in the window) of a global view.
    pub fn slot(&self, (s, t): (usize, usize)) -> Option<usize> {
        self.contains((s, t))
            .then(|| (s - self.row0) * REGION_SIDE + (t - self.col0))
    }

    pub fn view_of_slot(&self, slot: usize) -> (usize, usize) {
        (self.row0 + slot / REGION_SIDE, self.col0 + slot % REGION_SIDE)
    }

    /// Global views in slot order.
    pub fn views(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..REGION_VIEWS).map(|k| self.view_of_slot(k))
    }
}

/// The five key views: index 0 is the center, then the four cross views.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkvLayout {
    pub views: [(usize, usize); 5],
}

impl Default for SkvLayout {
    fn default() -> Self {
        SkvLayout {
            views: [(7, 7), (1, 7), (7, 1), (7, 13), (13, 7)],
        }
    }
}

impl SkvLayout {
    /// Checks the layout against the region geometry: center on both shared
    /// lines, each cross view on a shared line and inside the evaluated
    /// views, three key views per region.
    pub fn validate(&self) -> Result<()> {
        let mid = REGION_SIDE - 1;
        let [c, rest @ ..] = self.views;
        if c != (mid, mid) {
            return Err(Error::invalid(format!("center key view must be ({mid}, {mid})")));
        }
        for &(s, t) in &rest {
            if s >= GRID_SIDE || t >= GRID_SIDE || (s != mid && t != mid) || (s, t) == c {
                return Err(Error::invalid(format!("key view ({s}, {t}) is not on a shared line")));
            }
            if s == 0 || t == 0 || s == GRID_SIDE - 1 || t == GRID_SIDE - 1 {
                return Err(Error::invalid(format!("key view ({s}, {t}) lies on the outer ring")));
            }
        }
        for r in segment_regions(GRID_SIDE, GRID_SIDE)? {
            let n = self.views.iter().filter(|&&v| r.contains(v)).count();
            if n != 3 {
                return Err(Error::invalid(format!("region {} holds {n} key views, expected 3", r.id)));
            }
        }
        Ok(())
    }

    pub fn position(&self, view: (usize, usize)) -> Option<usize> {
        self.views.iter().position(|&v| v == view)
    }
}

/// The four regions of a 15x15 grid, with key views from the default layout.
pub fn segment_regions(rows: usize, cols: usize) -> Result<[CodingRegion; 4]> {
    regions_with_layout(rows, cols, &SkvLayout::default())
}

pub fn regions_with_layout(rows: usize, cols: usize, layout: &SkvLayout) -> Result<[CodingRegion; 4]> {
    if (rows, cols) != (GRID_SIDE, GRID_SIDE) {
        return Err(Error::invalid(format!(
            "coding regions need a {GRID_SIDE}x{GRID_SIDE} angular grid, got {rows}x{cols}"
        )));
    }
    let mid = REGION_SIDE - 1;
    let make = |id: usize, row0: usize, col0: usize| {
        let mut r = CodingRegion { id, row0, col0, skv_ids: Vec::new() };
        let mut ids: Vec<(usize, usize)> = layout.views.iter().copied().filter(|&v| r.contains(v)).collect();
        ids.sort_by_key(|&v| r.slot(v));
        r.skv_ids = ids;
        r
    };
    Ok([make(0, 0, 0), make(1, 0, mid), make(2, mid, 0), make(3, mid, mid)])
}

/// Local slots of the region's key views, ascending. Applying the extractor
/// to a patch stack keeps those slots' samples in this order.
pub fn skv_extractor(region: &CodingRegion) -> Vec<usize> {
    region.skv_ids.iter().map(|&v| region.slot(v).expect("key view inside region")).collect()
}

/// Rows of a patch stack selected by `slots`.
pub fn extract_rows(stack: &[f64], slots: &[usize], patch_area: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(slots.len() * patch_area);
    for &s in slots {
        out.extend_from_slice(&stack[s * patch_area..(s + 1) * patch_area]);
    }
    out
}

/// Writes `rows` back into the selected slots of a full stack.
pub fn embed_rows(rows: &[f64], slots: &[usize], patch_area: usize, stack: &mut [f64]) {
    for (k, &s) in slots.iter().enumerate() {
        stack[s * patch_area..(s + 1) * patch_area].copy_from_slice(&rows[k * patch_area..(k + 1) * patch_area]);
    }
}
