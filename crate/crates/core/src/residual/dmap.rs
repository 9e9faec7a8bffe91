//! Lossless coding of patch disparity levels.
//!
//! Layout: u16 nx, u16 ny, u8 level count (little-endian), then one
//! signed exp-Golomb residual per patch in raster order against the median
//! of the left, top and top-left levels. Confidence is encoder-side only and
//! is not transmitted.

use super::bits::{BitReader, BitWriter};
use crate::disparity::DisparityMap;
use crate::error::{Error, Result};

fn predict(levels: &[u16], nx: usize, i: usize) -> i64 {
    let (x, y) = (i % nx, i / nx);
    let at = |j: usize| i64::from(levels[j]);
    match (x > 0, y > 0) {
        (false, false) => 0,
        (true, false) => at(i - 1),
        (false, true) => at(i - nx),
        (true, true) => {
            let (a, b, c) = (at(i - 1), at(i - nx), at(i - nx - 1));
            a.max(b).min(a.min(b).max(c))
        }
    }
}

pub fn encode_disparity_map(map: &DisparityMap) -> Result<Vec<u8>> {
    let s_n = map.grid.len();
    if map.nx > usize::from(u16::MAX) || map.ny > usize::from(u16::MAX) || s_n > 255 || s_n == 0 {
        return Err(Error::invalid("disparity map dimensions exceed the format"));
    }
    if map.levels.len() != map.nx * map.ny || map.levels.iter().any(|&l| usize::from(l) >= s_n) {
        return Err(Error::invalid("disparity map levels inconsistent with its grid"));
    }
    let mut out = Vec::new();
    out.extend_from_slice(&(map.nx as u16).to_le_bytes());
    out.extend_from_slice(&(map.ny as u16).to_le_bytes());
    out.push(s_n as u8);
    let mut w = BitWriter::new();
    for i in 0..map.levels.len() {
        w.put_se(i64::from(map.levels[i]) - predict(&map.levels, map.nx, i));
    }
    out.extend(w.into_bytes());
    Ok(out)
}

/// Inverse of [`encode_disparity_map`]. `grid` must have the level count
/// recorded in the payload.
pub fn decode_disparity_map(bytes: &[u8], grid: &[f64]) -> Result<DisparityMap> {
    if bytes.len() < 5 {
        return Err(Error::corrupt("disparity map header truncated"));
    }
    let nx = usize::from(u16::from_le_bytes([bytes[0], bytes[1]]));
    let ny = usize::from(u16::from_le_bytes([bytes[2], bytes[3]]));
    let s_n = usize::from(bytes[4]);
    if s_n != grid.len() {
        return Err(Error::corrupt(format!("map has {s_n} levels, grid has {}", grid.len())));
    }
    let mut r = BitReader::new(&bytes[5..]);
    let mut levels = vec![0u16; nx * ny];
    for i in 0..levels.len() {
        let v = predict(&levels, nx, i) + r.se()?;
        if !(0..s_n as i64).contains(&v) {
            return Err(Error::corrupt("disparity level outside the grid"));
        }
        levels[i] = v as u16;
    }
    if 5 + r.byte_pos() != bytes.len() {
        return Err(Error::corrupt("trailing bytes after disparity map"));
    }
    Ok(DisparityMap {
        nx,
        ny,
        confidence: vec![0.0; levels.len()],
        levels,
        grid: grid.to_vec(),
    })
}
