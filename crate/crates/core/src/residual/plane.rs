//! Intra-only 8x8 block transform codec for 8-bit planes.
//!
//! Normative path: edge-replicate to a multiple of 8, subtract 128, integer
//! DCT, uniform rounding quantizer with step `2^((q - 4) / 6)` in
//! orthonormal units, zigzag scan, exp-Golomb coded tokens. The grammar is
//! documented in `docs/FORMAT.md`.

use super::bits::{BitReader, BitWriter};
use super::dct::{fdct_int, idct_int, ZIGZAG};
use crate::error::{Error, Result};
use crate::lf::Plane;

pub const Q_MIN: u8 = 1;
pub const Q_MAX: u8 = 51;

/// Quality parameters for key views and residual views.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantConfig {
    pub q_skv: u8,
    pub q_res: u8,
}

impl Default for QuantConfig {
    fn default() -> Self {
        QuantConfig { q_skv: 30, q_res: 30 }
    }
}

/// `round(32 * 2^(i/6))`, i = 0..5.
const STEP_BASE: [i64; 6] = [32, 36, 40, 45, 51, 57];

/// Quantizer step in 1/64 units: `64 * 2^((q - 4) / 6)`, from a fixed table.
pub fn step_q6(q: u8) -> Result<i64> {
    if !(Q_MIN..=Q_MAX).contains(&q) {
        return Err(Error::invalid(format!("q = {q} outside {Q_MIN}..={Q_MAX}")));
    }
    let k = usize::from(q) + 2;
    Ok(STEP_BASE[k % 6] << (k / 6))
}

/// Quantizer step as a real number.
pub fn step_size(q: u8) -> Result<f64> {
    Ok(step_q6(q)? as f64 / 64.0)
}

/// Coefficients are 8x orthonormal, so `level = round(8 F / step64)`.
#[inline]
fn quantize(f: i32, step64: i64) -> i32 {
    let a = (i64::from(f).abs() * 8 + step64 / 2) / step64;
    (if f < 0 { -a } else { a }) as i32
}

#[inline]
fn dequantize(level: i64, step64: i64) -> i32 {
    let a = (level.abs() * step64 + 4) / 8;
    (if level < 0 { -a } else { a }) as i32
}

/// Largest level magnitude a decoder accepts.
const MAX_LEVEL: i64 = 1 << 16;

/// One coded plane. `payload` is the byte-aligned block data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPlane {
    pub width: usize,
    pub height: usize,
    pub q: u8,
    pub payload: Vec<u8>,
}

impl CodedPlane {
    /// Standalone form: u16 width, u16 height, u8 q (little-endian), payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.height as u16).to_le_bytes());
        out.push(self.q);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 {
            return Err(Error::corrupt("coded plane header truncated"));
        }
        Ok(CodedPlane {
            width: usize::from(u16::from_le_bytes([bytes[0], bytes[1]])),
            height: usize::from(u16::from_le_bytes([bytes[2], bytes[3]])),
            q: bytes[4],
            payload: bytes[5..].to_vec(),
        })
    }
}

fn quantized_blocks(plane: &Plane, step64: i64) -> Vec<[i32; 64]> {
    let bw = plane.width.div_ceil(8);
    let bh = plane.height.div_ceil(8);
    let mut blocks = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let mut b = [0i32; 64];
            for y in 0..8 {
                let sy = (by * 8 + y).min(plane.height - 1);
                for x in 0..8 {
                    let sx = (bx * 8 + x).min(plane.width - 1);
                    b[y * 8 + x] = i32::from(plane.get(sx, sy)) - 128;
                }
            }
            let c = fdct_int(&b);
            blocks.push(c.map(|f| quantize(f, step64)));
        }
    }
    blocks
}

/// Appends a plane's block data to `w` and byte-aligns.
pub(crate) fn write_plane(w: &mut BitWriter, plane: &Plane, q: u8) -> Result<()> {
    let step64 = step_q6(q)?;
    let blocks = quantized_blocks(plane, step64);
    let empty = |b: &[i32; 64], prev_dc: i32| b[0] == prev_dc && b[1..].iter().all(|&l| l == 0);

    let mut prev = 0;
    let any = blocks.iter().any(|b| {
        let e = empty(b, prev);
        prev = b[0];
        !e
    });
    w.put_bit(any);
    if any {
        let mut prev_dc = 0i32;
        let mut skip = 0u64;
        for b in &blocks {
            if empty(b, prev_dc) {
                skip += 1;
                continue;
            }
            w.put_ue(skip);
            skip = 0;
            w.put_se(i64::from(b[0] - prev_dc));
            prev_dc = b[0];
            let nz: Vec<(usize, i32)> = (1..64)
                .map(|i| (i, b[ZIGZAG[i]]))
                .filter(|&(_, l)| l != 0)
                .collect();
            w.put_ue(nz.len() as u64);
            let mut last = 0;
            for (i, l) in nz {
                w.put_ue((i - last - 1) as u64);
                w.put_ue(u64::from(l.unsigned_abs()) - 1);
                w.put_bit(l < 0);
                last = i;
            }
        }
        if skip > 0 {
            w.put_ue(skip);
        }
    }
    w.align();
    Ok(())
}

/// Reads one plane written by [`write_plane`].
pub(crate) fn read_plane(r: &mut BitReader<'_>, width: usize, height: usize, q: u8) -> Result<Plane> {
    if width == 0 || height == 0 {
        return Err(Error::corrupt("coded plane has a zero dimension"));
    }
    let step64 = step_q6(q).map_err(|e| Error::corrupt(e.to_string()))?;
    let bw = width.div_ceil(8);
    let bh = height.div_ceil(8);
    let n_blocks = bw * bh;
    let mut levels = vec![[0i32; 64]; n_blocks];

    if r.bit()? {
        let mut prev_dc = 0i32;
        let mut pos = 0usize;
        while pos < n_blocks {
            let skip = r.ue()? as usize;
            if skip > n_blocks - pos {
                return Err(Error::corrupt("block skip runs past the plane"));
            }
            for b in &mut levels[pos..pos + skip] {
                b[0] = prev_dc;
            }
            pos += skip;
            if pos == n_blocks {
                break;
            }
            let dc = i64::from(prev_dc) + r.se()?;
            if dc.abs() > MAX_LEVEL {
                return Err(Error::corrupt("DC level out of range"));
            }
            let block = &mut levels[pos];
            block[0] = dc as i32;
            prev_dc = dc as i32;
            let n = r.ue()?;
            if n > 63 {
                return Err(Error::corrupt("too many AC coefficients"));
            }
            let mut i = 0usize;
            for _ in 0..n {
                let run = r.ue()?;
                let mag = r.ue()? + 1;
                let neg = r.bit()?;
                i += run as usize + 1;
                if i > 63 || mag as i64 > MAX_LEVEL {
                    return Err(Error::corrupt("AC token out of range"));
                }
                block[ZIGZAG[i]] = if neg { -(mag as i32) } else { mag as i32 };
            }
            pos += 1;
        }
    }
    r.align();

    let mut out = Plane::filled(width, height, 0);
    for (bi, l) in levels.iter().enumerate() {
        let coeffs = l.map(|v| dequantize(i64::from(v), step64));
        let px = idct_int(&coeffs);
        let (bx, by) = (bi % bw, bi / bw);
        for y in 0..8 {
            let py = by * 8 + y;
            if py >= height {
                break;
            }
            for x in 0..8 {
                let pxx = bx * 8 + x;
                if pxx >= width {
                    break;
                }
                out.set(pxx, py, (px[y * 8 + x] + 128).clamp(0, 255) as u8);
            }
        }
    }
    Ok(out)
}

pub fn encode_plane(plane: &Plane, q: u8) -> Result<CodedPlane> {
    if plane.width > usize::from(u16::MAX) || plane.height > usize::from(u16::MAX) {
        return Err(Error::invalid("plane exceeds u16 dimensions"));
    }
    let mut w = BitWriter::new();
    write_plane(&mut w, plane, q)?;
    Ok(CodedPlane {
        width: plane.width,
        height: plane.height,
        q,
        payload: w.into_bytes(),
    })
}

pub fn decode_plane(coded: &CodedPlane) -> Result<Plane> {
    let mut r = BitReader::new(&coded.payload);
    let p = read_plane(&mut r, coded.width, coded.height, coded.q)?;
    if r.byte_pos() != coded.payload.len() {
        return Err(Error::corrupt("trailing bytes after plane data"));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::psnr_planes;

    fn textured(w: usize, h: usize, seed: u32) -> Plane {
        let data = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                let v = 128.0
                    + 60.0 * (x * 0.31 + f64::from(seed)).sin()
                    + 40.0 * (y * 0.17 - x * 0.05).cos()
                    + 15.0 * ((x * y * 0.013) + f64::from(seed)).sin();
                v.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Plane::new(w, h, data).unwrap()
    }

    #[test]
    fn step_ladder() {
        assert_eq!(step_size(4).unwrap(), 1.0);
        assert_eq!(step_size(10).unwrap(), 2.0);
        assert!((step_size(1).unwrap() - 0.703).abs() < 0.01);
        assert!((step_size(51).unwrap() - 2f64.powf(47.0 / 6.0)).abs() / 228.0 < 0.01);
        for q in 1..51 {
            assert!(step_q6(q + 1).unwrap() > step_q6(q).unwrap());
        }
        assert!(step_q6(0).is_err());
        assert!(step_q6(52).is_err());
    }

    #[test]
    fn finest_q_is_near_lossless() {
        let p = textured(37, 29, 1);
        let back = decode_plane(&encode_plane(&p, 1).unwrap()).unwrap();
        assert!(psnr_planes(&p, &back) >= 50.0);
    }

    #[test]
    fn error_is_bounded_by_four_steps() {
        let p = textured(40, 24, 2);
        for q in [10u8, 22, 30, 40, 51] {
            let back = decode_plane(&encode_plane(&p, q).unwrap()).unwrap();
            let step = step_size(q).unwrap();
            let worst = p
                .data
                .iter()
                .zip(&back.data)
                .map(|(a, b)| (i32::from(*a) - i32::from(*b)).abs())
                .max()
                .unwrap();
            assert!(f64::from(worst) <= 4.0 * step + 1.0, "q {q}: {worst}");
        }
    }

    #[test]
    fn constant_plane_is_tiny() {
        for v in [0u8, 77, 128, 255] {
            let p = Plane::filled(624, 432, v);
            let c = encode_plane(&p, 30).unwrap();
            let block_rows = 432 / 8;
            assert!(c.payload.len() <= 3 * block_rows, "{} bytes", c.payload.len());
            let back = decode_plane(&c).unwrap();
            let step = step_size(30).unwrap();
            assert!(back.data.iter().all(|&b| f64::from((i32::from(b) - i32::from(v)).abs()) <= 4.0 * step));
        }
        let zero = encode_plane(&Plane::filled(64, 64, 128), 30).unwrap();
        assert_eq!(zero.payload.len(), 1);
    }

    #[test]
    fn re_encoding_the_decoded_plane_is_stable() {
        let p = textured(33, 17, 3);
        let once = decode_plane(&encode_plane(&p, 28).unwrap()).unwrap();
        let a = encode_plane(&once, 28).unwrap();
        let b = encode_plane(&once, 28).unwrap();
        assert_eq!(a, b);
        assert_eq!(decode_plane(&a).unwrap(), decode_plane(&b).unwrap());
    }

    #[test]
    fn finer_q_costs_more_and_looks_better() {
        let p = textured(64, 48, 4);
        let mut prev: Option<(usize, f64)> = None;
        for q in (1..=51u8).rev().step_by(5) {
            let c = encode_plane(&p, q).unwrap();
            let psnr = psnr_planes(&p, &decode_plane(&c).unwrap());
            if let Some((bytes, pp)) = prev {
                assert!(c.payload.len() >= bytes, "q {q}");
                assert!(psnr >= pp, "q {q}");
            }
            prev = Some((c.payload.len(), psnr));
        }
    }

    #[test]
    fn corrupt_payloads_are_rejected() {
        let p = textured(32, 32, 5);
        let c = encode_plane(&p, 20).unwrap();
        let mut cut = c.clone();
        cut.payload.truncate(c.payload.len() / 2);
        assert!(decode_plane(&cut).is_err());
        let mut extra = c.clone();
        extra.payload.push(0);
        assert!(decode_plane(&extra).is_err());
        let bytes = c.to_bytes();
        assert_eq!(CodedPlane::from_bytes(&bytes).unwrap(), c);
        assert!(CodedPlane::from_bytes(&bytes[..3]).is_err());
    }
}
