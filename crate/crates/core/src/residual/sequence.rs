//! Pseudo-sequence of planes coded one after another at a single q.
//!
//! Layout (little-endian): u16 plane count, u8 q, u8 order mode, u8 dims
//! class count, then u16 width and u16 height per class. Order mode 0 means
//! plane ids are `0..count` in coded order; mode 1 is followed by an
//! exp-Golomb table of id deltas (first against 0), byte aligned. Planes
//! follow back to back, each byte aligned, each prefixed by `ue(class)`
//! when there is more than one dims class.

use super::bits::{BitReader, BitWriter};
use super::plane::{read_plane, write_plane};
use crate::error::{Error, Result};
use crate::lf::Plane;

const ORDER_IMPLICIT: u8 = 0;
const ORDER_TABLE: u8 = 1;

/// Codes `planes` in the given order. Each entry carries a caller-chosen id
/// that the decoder hands back, so any permutation can be restored.
pub fn encode_sequence(planes: &[(u16, &Plane)], q: u8) -> Result<Vec<u8>> {
    if planes.len() > usize::from(u16::MAX) {
        return Err(Error::invalid("too many planes in one sequence"));
    }
    let mut classes: Vec<(usize, usize)> = Vec::new();
    let mut class_of = Vec::with_capacity(planes.len());
    for (_, p) in planes {
        if p.width > usize::from(u16::MAX) || p.height > usize::from(u16::MAX) {
            return Err(Error::invalid("plane exceeds u16 dimensions"));
        }
        let d = (p.width, p.height);
        let c = classes.iter().position(|&x| x == d).unwrap_or_else(|| {
            classes.push(d);
            classes.len() - 1
        });
        class_of.push(c);
    }
    if classes.len() > 255 {
        return Err(Error::invalid("too many distinct plane sizes"));
    }
    let implicit = planes.iter().enumerate().all(|(i, (id, _))| usize::from(*id) == i);

    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(planes.len() as u16).to_le_bytes());
    bytes.push(q);
    bytes.push(if implicit { ORDER_IMPLICIT } else { ORDER_TABLE });
    bytes.push(classes.len() as u8);
    for &(cw, ch) in &classes {
        bytes.extend_from_slice(&(cw as u16).to_le_bytes());
        bytes.extend_from_slice(&(ch as u16).to_le_bytes());
    }

    let mut w = BitWriter::new();
    if !implicit {
        let mut prev = 0i64;
        for (id, _) in planes {
            w.put_se(i64::from(*id) - prev);
            prev = i64::from(*id);
        }
        w.align();
    }
    for ((_, p), &c) in planes.iter().zip(&class_of) {
        if classes.len() > 1 {
            w.put_ue(c as u64);
        }
        write_plane(&mut w, p, q)?;
    }
    bytes.extend(w.into_bytes());
    Ok(bytes)
}

/// Decodes a sequence, returning `(id, plane)` pairs in coded order.
pub fn decode_sequence(bytes: &[u8]) -> Result<Vec<(u16, Plane)>> {
    let u16_at = |o: usize| -> Result<usize> {
        bytes
            .get(o..o + 2)
            .map(|s| usize::from(u16::from_le_bytes([s[0], s[1]])))
            .ok_or_else(|| Error::corrupt("sequence header truncated"))
    };
    let count = u16_at(0)?;
    if bytes.len() < 5 {
        return Err(Error::corrupt("sequence header truncated"));
    }
    let (q, mode, n_classes) = (bytes[2], bytes[3], usize::from(bytes[4]));
    let mut classes = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        classes.push((u16_at(5 + 4 * c)?, u16_at(7 + 4 * c)?));
    }
    if count > 0 && n_classes == 0 {
        return Err(Error::corrupt("sequence has planes but no sizes"));
    }
    let mut r = BitReader::new(&bytes[5 + 4 * n_classes..]);
    let ids: Vec<u16> = match mode {
        ORDER_IMPLICIT => (0..count as u16).collect(),
        ORDER_TABLE => {
            let mut prev = 0i64;
            let mut ids = Vec::with_capacity(count);
            for _ in 0..count {
                prev += r.se()?;
                let id = u16::try_from(prev).map_err(|_| Error::corrupt("plane id out of range"))?;
                ids.push(id);
            }
            r.align();
            ids
        }
        m => return Err(Error::corrupt(format!("unknown order mode {m}"))),
    };
    let mut out = Vec::with_capacity(count);
    for id in ids {
        let c = if n_classes > 1 { r.ue()? as usize } else { 0 };
        let &(w, h) = classes.get(c).ok_or_else(|| Error::corrupt("dims class out of range"))?;
        out.push((id, read_plane(&mut r, w, h, q)?));
    }
    if 5 + 4 * n_classes + r.byte_pos() != bytes.len() {
        return Err(Error::corrupt("trailing bytes after sequence"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Plane {
        Plane::new(w, h, (0..w * h).map(|_| rng.random_range(100..156)).collect()).unwrap()
    }

    #[test]
    fn all_zero_residuals_cost_under_a_hundredth_of_a_bit() {
        let (w, h) = (64, 64);
        let y = Plane::filled(w, h, 128);
        let c = Plane::filled(w / 2, h / 2, 128);
        let planes: Vec<(u16, &Plane)> =
            (0..165 * 3).map(|i| (i as u16, if i % 3 == 0 { &y } else { &c })).collect();
        let bytes = encode_sequence(&planes, 30).unwrap();
        let bpp = bytes.len() as f64 * 8.0 / (w * h * 165) as f64;
        assert!(bpp < 0.01, "{bpp}");
        let back = decode_sequence(&bytes).unwrap();
        assert_eq!(back.len(), 495);
        assert!(back.iter().all(|(_, p)| p.data.iter().all(|&v| v == 128)));
    }

    #[test]
    fn permutations_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let store: Vec<Plane> = (0..12).map(|i| noise(9 + i, 7 + 2 * i, &mut rng)).collect();
        for _ in 0..10 {
            let mut ids: Vec<u16> = (0..12).map(|i| i * 5 + 1).collect();
            ids.shuffle(&mut rng);
            let planes: Vec<(u16, &Plane)> = ids.iter().zip(&store).map(|(&i, p)| (i, p)).collect();
            let back = decode_sequence(&encode_sequence(&planes, 12).unwrap()).unwrap();
            assert_eq!(back.len(), planes.len());
            for ((id, p), (bid, bp)) in planes.iter().zip(&back) {
                assert_eq!(id, bid);
                assert_eq!((p.width, p.height), (bp.width, bp.height));
            }
        }
    }

    #[test]
    fn empty_sequence() {
        let bytes = encode_sequence(&[], 30).unwrap();
        assert!(decode_sequence(&bytes).unwrap().is_empty());
    }

    #[test]
    fn truncation_and_garbage_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = noise(16, 16, &mut rng);
        let b = noise(8, 8, &mut rng);
        let bytes = encode_sequence(&[(0, &a), (7, &b)], 20).unwrap();
        for cut in [1, 4, 8, bytes.len() - 1] {
            assert!(decode_sequence(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_sequence(&extra).is_err());
        let mut bad_mode = bytes.clone();
        bad_mode[3] = 9;
        assert!(decode_sequence(&bad_mode).is_err());
    }
}
