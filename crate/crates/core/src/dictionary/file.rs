//! `.lfd` dictionary files.
//!
//! Layout (little-endian): magic `LFD1`, u16 atom count, u16 canvas side,
//! u8 patch size, u16 level count, the levels as f32, every atom canvas as
//! row-major f32, then the u64 content hash.

use std::fs;
use std::path::Path;

use super::{build_dictionary, Atom2D, LfDictionary};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LFD1";

pub fn write_lfd(dict: &LfDictionary) -> Vec<u8> {
    let m = dict.canvas_size();
    let mut out = Vec::with_capacity(15 + 4 * dict.num_levels() + 4 * dict.num_atoms() * m * m + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dict.num_atoms() as u16).to_le_bytes());
    out.extend_from_slice(&(m as u16).to_le_bytes());
    out.push(dict.patch_size() as u8);
    out.extend_from_slice(&(dict.num_levels() as u16).to_le_bytes());
    for &l in dict.levels() {
        out.extend_from_slice(&(l as f32).to_le_bytes());
    }
    for a in dict.atoms() {
        for &v in &a.pixels {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&dict.content_hash().to_le_bytes());
    out
}

pub fn read_lfd(bytes: &[u8]) -> Result<LfDictionary> {
    if bytes.len() < 11 || &bytes[..4] != MAGIC {
        return Err(Error::format("not an LFD1 dictionary"));
    }
    let u16_at = |o: usize| usize::from(u16::from_le_bytes([bytes[o], bytes[o + 1]]));
    let k_c = u16_at(4);
    let m = u16_at(6);
    let patch = usize::from(bytes[8]);
    let s_n = u16_at(9);
    let expected = 11 + 4 * s_n + 4 * k_c * m * m + 8;
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "dictionary file is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let f32_at = |o: usize| f64::from(f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()));
    let levels: Vec<f64> = (0..s_n).map(|i| f32_at(11 + 4 * i)).collect();
    let base = 11 + 4 * s_n;
    let atoms = (0..k_c)
        .map(|k| {
            let o = base + 4 * k * m * m;
            Atom2D::new(m, (0..m * m).map(|i| f32_at(o + 4 * i)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().unwrap());
    let dict = build_dictionary(atoms, levels, patch)?;
    if dict.content_hash() != stored {
        return Err(Error::corrupt(format!(
            "dictionary hash {:016x} does not match stored {stored:016x}",
            dict.content_hash()
        )));
    }
    Ok(dict)
}

pub fn save_lfd(dict: &LfDictionary, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_lfd(dict))?;
    Ok(())
}

pub fn load_lfd(path: impl AsRef<Path>) -> Result<LfDictionary> {
    read_lfd(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{dct_fallback_atoms, default_disparity_grid};

    #[test]
    fn file_round_trip_preserves_hash_and_columns() {
        let atoms = dct_fallback_atoms(16, 30, 8).unwrap();
        let d = build_dictionary(atoms, default_disparity_grid(), 8).unwrap();
        let bytes = write_lfd(&d);
        let back = read_lfd(&bytes).unwrap();
        assert_eq!(back.content_hash(), d.content_hash());
        assert_eq!(back.column(3, 5), d.column(3, 5));
        assert_eq!(write_lfd(&back), bytes);
    }

    #[test]
    fn tampered_file_is_rejected() {
        let atoms = dct_fallback_atoms(4, 30, 8).unwrap();
        let d = build_dictionary(atoms, default_disparity_grid(), 8).unwrap();
        let mut bytes = write_lfd(&d);
        let i = bytes.len() - 100;
        bytes[i] ^= 0x40;
        assert!(read_lfd(&bytes).is_err());
        assert!(read_lfd(&bytes[..bytes.len() - 1]).is_err());
    }
}
