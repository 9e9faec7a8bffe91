//! On-disk light field formats.
//!
//! * Directory: `manifest.json`, a `mask.txt` sidecar and one file per view
//!   named `view_SS_TT.<ext>`. Views are either raw planar 4:2:0 (`.yuv`,
//!   the format [`save_lf_dir`] writes) or 8-bit PNG (RGB or gray) which is
//!   converted on load.
//! * `.lfraw`: a single little-endian planar container, see [`save_lfraw`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    chroma_dims, default_valid_mask, rgb_to_yuv, subsample_420, LightField, Plane, View,
    BIT_DEPTH, CHROMA_420,
};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MASK_FILE: &str = "mask.txt";
const RAW_MAGIC: &[u8; 4] = b"LFR1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    angular_rows: usize,
    angular_cols: usize,
    width: usize,
    height: usize,
    bit_depth: u8,
    /// `yuv420` (raw planar views) or `png`.
    format: String,
}

fn view_stem(s: usize, t: usize) -> String {
    format!("view_{s:02}_{t:02}")
}

/// Loads a light field from a directory or an `.lfraw` container.
pub fn load_lf(path: impl AsRef<Path>) -> Result<LightField> {
    let path = path.as_ref();
    if path.is_dir() {
        load_lf_dir(path)
    } else {
        load_lfraw(path)
    }
}

/// Saves to `.lfraw` when the path has that extension, else to a directory.
pub fn save_lf(lf: &LightField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "lfraw") {
        save_lfraw(lf, path)
    } else {
        save_lf_dir(lf, path)
    }
}

pub fn save_lf_dir(lf: &LightField, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        angular_rows: lf.rows(),
        angular_cols: lf.cols(),
        width: lf.width(),
        height: lf.height(),
        bit_depth: BIT_DEPTH,
        format: "yuv420".into(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), json)?;

    let mut mask = String::with_capacity(lf.rows() * (lf.cols() + 1));
    for s in 0..lf.rows() {
        for t in 0..lf.cols() {
            mask.push(if lf.is_valid(s, t) { '1' } else { '0' });
        }
        mask.push('\n');
    }
    fs::write(dir.join(MASK_FILE), mask)?;

    for s in 0..lf.rows() {
        for t in 0..lf.cols() {
            let v = lf.view(s, t);
            let mut bytes = Vec::new();
            for p in &v.planes {
                bytes.extend_from_slice(&p.data);
            }
            fs::write(dir.join(format!("{}.yuv", view_stem(s, t))), bytes)?;
        }
    }
    Ok(())
}

fn load_lf_dir(dir: &Path) -> Result<LightField> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(e.to_string()))?;
    if m.bit_depth != BIT_DEPTH {
        return Err(Error::UnsupportedBitDepth(m.bit_depth));
    }
    if m.angular_rows == 0 || m.angular_cols == 0 || m.width == 0 || m.height == 0 {
        return Err(Error::format("manifest has a zero dimension"));
    }
    let (cw, ch) = chroma_dims(m.width, m.height);
    let mut views = Vec::with_capacity(m.angular_rows * m.angular_cols);
    for s in 0..m.angular_rows {
        for t in 0..m.angular_cols {
            let view = match m.format.as_str() {
                "yuv420" => {
                    let p = dir.join(format!("{}.yuv", view_stem(s, t)));
                    if !p.exists() {
                        return Err(Error::MissingView(s, t));
                    }
                    let bytes = fs::read(&p)?;
                    let luma = m.width * m.height;
                    if bytes.len() != luma + 2 * cw * ch {
                        return Err(Error::DimensionMismatch(format!(
                            "{} has {} bytes, expected {}",
                            p.display(),
                            bytes.len(),
                            luma + 2 * cw * ch
                        )));
                    }
                    View::new(
                        Plane::new(m.width, m.height, bytes[..luma].to_vec())?,
                        Plane::new(cw, ch, bytes[luma..luma + cw * ch].to_vec())?,
                        Plane::new(cw, ch, bytes[luma + cw * ch..].to_vec())?,
                    )?
                }
                "png" => {
                    let p = dir.join(format!("{}.png", view_stem(s, t)));
                    if !p.exists() {
                        return Err(Error::MissingView(s, t));
                    }
                    load_png_view(&p, m.width, m.height)?
                }
                other => return Err(Error::format(format!("unknown view format '{other}'"))),
            };
            views.push(view);
        }
    }
    let mask_path = dir.join(MASK_FILE);
    let valid = if mask_path.exists() {
        parse_mask(&fs::read_to_string(mask_path)?, m.angular_rows, m.angular_cols)?
    } else {
        default_valid_mask(m.angular_rows, m.angular_cols)
    };
    LightField::new(m.angular_rows, m.angular_cols, views, valid)
}

/// Loads an 8-bit image (any format the decoder knows) as a luma plane.
pub fn load_luma_image(path: &Path) -> Result<Plane> {
    let img = image::open(path)?;
    let rgb = img.to_rgb8();
    let y = rgb.pixels().map(|px| rgb_to_yuv(px[0], px[1], px[2])[0]).collect();
    Plane::new(img.width() as usize, img.height() as usize, y)
}

fn load_png_view(path: &Path, width: usize, height: usize) -> Result<View> {
    let img = image::open(path)?;
    let bits = img.color().bits_per_pixel() / u16::from(img.color().channel_count());
    if bits != 8 {
        return Err(Error::UnsupportedBitDepth(bits.min(255) as u8));
    }
    if img.width() as usize != width || img.height() as usize != height {
        return Err(Error::DimensionMismatch(format!(
            "{} is {}x{}, expected {}x{}",
            path.display(),
            img.width(),
            img.height(),
            width,
            height
        )));
    }
    let rgb = img.to_rgb8();
    let mut y = Vec::with_capacity(width * height);
    let mut u = Vec::with_capacity(width * height);
    let mut v = Vec::with_capacity(width * height);
    for px in rgb.pixels() {
        let [py, pu, pv] = rgb_to_yuv(px[0], px[1], px[2]);
        y.push(py);
        u.push(pu);
        v.push(pv);
    }
    View::new(
        Plane::new(width, height, y)?,
        subsample_420(&Plane::new(width, height, u)?),
        subsample_420(&Plane::new(width, height, v)?),
    )
}

fn parse_mask(text: &str, rows: usize, cols: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(rows * cols);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.len() != cols {
            return Err(Error::format(format!("mask row '{line}' is not {cols} wide")));
        }
        for c in line.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => return Err(Error::format(format!("bad mask character '{c}'"))),
            }
        }
    }
    if out.len() != rows * cols {
        return Err(Error::format(format!("mask has {} entries, expected {}", out.len(), rows * cols)));
    }
    Ok(out)
}

/// Writes the `.lfraw` container: magic `LFR1`; little-endian u16 rows, cols,
/// width, height; u8 bit depth; u8 chroma mode; the validity bitmap
/// (LSB-first, row-major, `ceil(rows*cols/8)` bytes); then every view in
/// row-major order as Y, U, V planes of row-major bytes.
pub fn save_lfraw(lf: &LightField, path: &Path) -> Result<()> {
    fs::write(path, lfraw_bytes(lf)?)?;
    Ok(())
}

pub(crate) fn lfraw_bytes(lf: &LightField) -> Result<Vec<u8>> {
    let dims = [lf.rows(), lf.cols(), lf.width(), lf.height()];
    if dims.iter().any(|&d| d > usize::from(u16::MAX)) {
        return Err(Error::invalid("dimension exceeds u16 range"));
    }
    let n = lf.rows() * lf.cols();
    let mut out = Vec::new();
    out.extend_from_slice(RAW_MAGIC);
    for d in dims {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    out.push(BIT_DEPTH);
    out.push(CHROMA_420);
    let mut mask = vec![0u8; n.div_ceil(8)];
    for (i, &v) in lf.valid_mask().iter().enumerate() {
        if v {
            mask[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&mask);
    for v in lf.views() {
        for p in &v.planes {
            out.extend_from_slice(&p.data);
        }
    }
    Ok(out)
}

pub fn load_lfraw(path: &Path) -> Result<LightField> {
    let bytes = fs::read(path)?;
    parse_lfraw(&bytes)
}

pub(crate) fn parse_lfraw(bytes: &[u8]) -> Result<LightField> {
    if bytes.len() < 14 || &bytes[..4] != RAW_MAGIC {
        return Err(Error::format("not an LFR1 container"));
    }
    let u16_at = |o: usize| usize::from(u16::from_le_bytes([bytes[o], bytes[o + 1]]));
    let (rows, cols, width, height) = (u16_at(4), u16_at(6), u16_at(8), u16_at(10));
    let (depth, chroma) = (bytes[12], bytes[13]);
    if depth != BIT_DEPTH {
        return Err(Error::UnsupportedBitDepth(depth));
    }
    if chroma != CHROMA_420 {
        return Err(Error::format(format!("unsupported chroma mode {chroma}")));
    }
    if rows == 0 || cols == 0 || width == 0 || height == 0 {
        return Err(Error::format("container has a zero dimension"));
    }
    let n = rows * cols;
    let mask_len = n.div_ceil(8);
    let (cw, ch) = chroma_dims(width, height);
    let view_len = width * height + 2 * cw * ch;
    let expected = 14 + mask_len + n * view_len;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "container is {} bytes, header implies {}",
            bytes.len(),
            expected
        )));
    }
    let mask = &bytes[14..14 + mask_len];
    let valid = (0..n).map(|i| mask[i / 8] >> (i % 8) & 1 == 1).collect();
    let mut views = Vec::with_capacity(n);
    let mut at = 14 + mask_len;
    for _ in 0..n {
        let take = |at: &mut usize, len: usize| {
            let s = bytes[*at..*at + len].to_vec();
            *at += len;
            s
        };
        let y = Plane::new(width, height, take(&mut at, width * height))?;
        let u = Plane::new(cw, ch, take(&mut at, cw * ch))?;
        let v = Plane::new(cw, ch, take(&mut at, cw * ch))?;
        views.push(View::new(y, u, v)?);
    }
    LightField::new(rows, cols, views, valid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_lf(rows: usize, cols: usize, w: usize, h: usize) -> LightField {
        let (cw, ch) = chroma_dims(w, h);
        let views = (0..rows * cols)
            .map(|i| {
                let f = |n: usize, k: u8| (0..n).map(|p| (p as u8).wrapping_mul(7).wrapping_add(i as u8 + k)).collect();
                View::new(
                    Plane::new(w, h, f(w * h, 0)).unwrap(),
                    Plane::new(cw, ch, f(cw * ch, 1)).unwrap(),
                    Plane::new(cw, ch, f(cw * ch, 2)).unwrap(),
                )
                .unwrap()
            })
            .collect();
        LightField::with_default_mask(rows, cols, views).unwrap()
    }

    #[test]
    fn directory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let lf = ramp_lf(8, 8, 9, 7);
        save_lf(&lf, dir.path()).unwrap();
        assert_eq!(load_lf(dir.path()).unwrap(), lf);
    }

    #[test]
    fn directory_write_emits_one_file_per_view_plus_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let lf = ramp_lf(15, 15, 4, 4);
        assert_eq!(lf.num_valid(), 165);
        save_lf(&lf, dir.path()).unwrap();
        let names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names.iter().filter(|n| n.starts_with("view_")).count(), 225);
        assert!(names.iter().any(|n| n == MASK_FILE));
        assert!(names.iter().any(|n| n == MANIFEST_FILE));
        assert_eq!(load_lf(dir.path()).unwrap().num_valid(), 165);
    }

    #[test]
    fn raw_container_size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.lfraw");
        let lf = ramp_lf(15, 15, 11, 5);
        save_lf(&lf, &path).unwrap();
        let size = fs::metadata(&path).unwrap().len() as usize;
        // header 14 bytes, ceil(225/8) = 29 mask bytes, 225 views of
        // 11*5 luma + 2 * 6*3 chroma.
        assert_eq!(size, 14 + 29 + 225 * (55 + 36));
        assert_eq!(load_lf(&path).unwrap(), lf);
    }

    #[test]
    fn missing_view_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_lf(&ramp_lf(2, 2, 4, 4), dir.path()).unwrap();
        fs::remove_file(dir.path().join("view_01_00.yuv")).unwrap();
        assert!(matches!(load_lf(dir.path()), Err(Error::MissingView(1, 0))));
    }

    #[test]
    fn truncated_view_is_a_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        save_lf(&ramp_lf(2, 2, 4, 4), dir.path()).unwrap();
        fs::write(dir.path().join("view_00_01.yuv"), [0u8; 5]).unwrap();
        assert!(matches!(load_lf(dir.path()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn unsupported_bit_depth_is_rejected() {
        let lf = ramp_lf(1, 1, 4, 4);
        let mut bytes = lfraw_bytes(&lf).unwrap();
        bytes[12] = 10;
        assert!(matches!(parse_lfraw(&bytes), Err(Error::UnsupportedBitDepth(10))));
    }

    #[test]
    fn png_views_are_converted_and_subsampled() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            angular_rows: 1,
            angular_cols: 2,
            width: 6,
            height: 4,
            bit_depth: 8,
            format: "png".into(),
        };
        fs::write(dir.path().join(MANIFEST_FILE), serde_json::to_string(&m).unwrap()).unwrap();
        for t in 0..2 {
            let img = image::RgbImage::from_pixel(6, 4, image::Rgb([200, 100, 50]));
            img.save(dir.path().join(format!("view_00_{t:02}.png"))).unwrap();
        }
        let lf = load_lf(dir.path()).unwrap();
        let [y, u, v] = rgb_to_yuv(200, 100, 50);
        let view = lf.view(0, 1);
        assert!(view.planes[0].data.iter().all(|&p| p == y));
        assert_eq!((view.planes[1].width, view.planes[1].height), (3, 2));
        assert!(view.planes[1].data.iter().all(|&p| p == u));
        assert!(view.planes[2].data.iter().all(|&p| p == v));
    }
}
