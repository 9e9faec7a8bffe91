//! `.scskv` container: a CRC-protected header followed by sections.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! "SCSKV1"
//! u16 angular rows, u16 angular cols, u16 width, u16 height
//! u8 chroma mode, u8 patch size, u8 stride
//! f32 epsilon, u16 max_coeffs
//! u8 level count, f32 x count
//! u8 key-view count, (u8 s, u8 t) x count
//! u8 q_skv, u8 q_res
//! u64 dictionary hash
//! u16 evaluated views, u8 mode
//! u8 section count, (u8 id, u32 offset, u32 length, u32 crc32) x count
//! u32 crc32 of everything above
//! section payloads, in table order, back to back
//! ```

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"SCSKV1";

pub const SECTION_SKV: u8 = 1;
pub const SECTION_DISPARITY: u8 = 2;
pub const SECTION_RESIDUAL: u8 = 3;

/// How the views were coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// Key views, disparity map and residuals against the sparse
    /// approximation.
    Full = 0,
    /// Every evaluated view coded directly at one q.
    Baseline = 1,
}

impl StreamMode {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(StreamMode::Full),
            1 => Ok(StreamMode::Baseline),
            m => Err(Error::format(format!("unknown stream mode {m}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub angular_rows: u16,
    pub angular_cols: u16,
    pub width: u16,
    pub height: u16,
    pub chroma_mode: u8,
    pub patch_size: u8,
    pub stride: u8,
    pub epsilon: f32,
    pub max_coeffs: u16,
    pub levels: Vec<f32>,
    pub skv_views: Vec<(u8, u8)>,
    pub q_skv: u8,
    pub q_res: u8,
    pub dict_hash: u64,
    pub eval_views: u16,
    pub mode: StreamMode,
}

/// One section as stored: id, absolute offset, payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub id: u8,
    pub offset: usize,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub header: StreamHeader,
    pub header_len: usize,
    pub sections: Vec<Section>,
}

impl Stream {
    pub fn section(&self, id: u8) -> Option<&[u8]> {
        self.sections.iter().find(|s| s.id == id).map(|s| s.data.as_slice())
    }
}

fn header_body(h: &StreamHeader) -> Result<Vec<u8>> {
    if h.levels.len() > 255 || h.skv_views.len() > 255 {
        return Err(Error::invalid("too many levels or key views for the header"));
    }
    let mut b = Vec::with_capacity(64 + 4 * h.levels.len());
    b.extend_from_slice(MAGIC);
    for v in [h.angular_rows, h.angular_cols, h.width, h.height] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b.extend_from_slice(&[h.chroma_mode, h.patch_size, h.stride]);
    b.extend_from_slice(&h.epsilon.to_le_bytes());
    b.extend_from_slice(&h.max_coeffs.to_le_bytes());
    b.push(h.levels.len() as u8);
    for l in &h.levels {
        b.extend_from_slice(&l.to_le_bytes());
    }
    b.push(h.skv_views.len() as u8);
    for &(s, t) in &h.skv_views {
        b.extend_from_slice(&[s, t]);
    }
    b.extend_from_slice(&[h.q_skv, h.q_res]);
    b.extend_from_slice(&h.dict_hash.to_le_bytes());
    b.extend_from_slice(&h.eval_views.to_le_bytes());
    b.push(h.mode as u8);
    Ok(b)
}

const SECTION_ENTRY: usize = 13;

/// Serializes a header and sections. Section ids must be unique.
pub fn write_stream(header: &StreamHeader, sections: &[(u8, &[u8])]) -> Result<Vec<u8>> {
    if sections.len() > 255 {
        return Err(Error::invalid("too many sections"));
    }
    for (i, (id, _)) in sections.iter().enumerate() {
        if sections[..i].iter().any(|(o, _)| o == id) {
            return Err(Error::invalid(format!("duplicate section id {id}")));
        }
    }
    let mut out = header_body(header)?;
    let header_len = out.len() + 1 + SECTION_ENTRY * sections.len() + 4;
    out.push(sections.len() as u8);
    let mut offset = header_len;
    for (id, data) in sections {
        let len = u32::try_from(data.len()).map_err(|_| Error::invalid("section exceeds 4 GiB"))?;
        let off = u32::try_from(offset).map_err(|_| Error::invalid("stream exceeds 4 GiB"))?;
        out.push(*id);
        out.extend_from_slice(&off.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(data).to_le_bytes());
        offset += data.len();
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    debug_assert_eq!(out.len(), header_len);
    for (_, data) in sections {
        out.extend_from_slice(data);
    }
    Ok(out)
}

struct Cursor<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .b
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::format("stream header truncated"))?;
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses and validates a stream. Header problems are `Format` errors,
/// section damage is `Corrupt`.
pub fn read_stream(bytes: &[u8]) -> Result<Stream> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::format("not an SCSKV1 stream"));
    }
    let mut c = Cursor { b: bytes, pos: MAGIC.len() };
    let angular_rows = c.u16()?;
    let angular_cols = c.u16()?;
    let width = c.u16()?;
    let height = c.u16()?;
    let chroma_mode = c.u8()?;
    let patch_size = c.u8()?;
    let stride = c.u8()?;
    let epsilon = c.f32()?;
    let max_coeffs = c.u16()?;
    let n_levels = usize::from(c.u8()?);
    let levels = (0..n_levels).map(|_| c.f32()).collect::<Result<Vec<_>>>()?;
    let n_skv = usize::from(c.u8()?);
    let skv_views = (0..n_skv)
        .map(|_| Ok((c.u8()?, c.u8()?)))
        .collect::<Result<Vec<_>>>()?;
    let q_skv = c.u8()?;
    let q_res = c.u8()?;
    let dict_hash = c.u64()?;
    let eval_views = c.u16()?;
    let mode_byte = c.u8()?;
    let n_sections = usize::from(c.u8()?);
    let mut table = Vec::with_capacity(n_sections);
    for _ in 0..n_sections {
        table.push((c.u8()?, c.u32()? as usize, c.u32()? as usize, c.u32()?));
    }
    let body_end = c.pos;
    let crc = c.u32()?;
    if crc32fast::hash(&bytes[..body_end]) != crc {
        return Err(Error::format("header CRC mismatch"));
    }
    let header_len = c.pos;
    let header = StreamHeader {
        angular_rows,
        angular_cols,
        width,
        height,
        chroma_mode,
        patch_size,
        stride,
        epsilon,
        max_coeffs,
        levels,
        skv_views,
        q_skv,
        q_res,
        dict_hash,
        eval_views,
        mode: StreamMode::from_u8(mode_byte)?,
    };

    let mut spans: Vec<(usize, usize)> = Vec::with_capacity(n_sections);
    let mut sections = Vec::with_capacity(n_sections);
    for (id, offset, len, crc) in table {
        let end = offset.checked_add(len).ok_or_else(|| Error::corrupt("section span overflows"))?;
        if offset < header_len || end > bytes.len() {
            return Err(Error::corrupt(format!("section {id} lies outside the stream")));
        }
        if spans.iter().any(|&(a, b)| offset < b && a < end) {
            return Err(Error::corrupt(format!("section {id} overlaps another section")));
        }
        spans.push((offset, end));
        let data = &bytes[offset..end];
        if crc32fast::hash(data) != crc {
            return Err(Error::corrupt(format!("section {id} CRC mismatch")));
        }
        sections.push(Section { id, offset, data: data.to_vec() });
    }
    Ok(Stream { header, header_len, sections })
}

/// Byte counts per section and the resulting rate.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct BitAccounting {
    pub total_bytes: usize,
    pub header_bytes: usize,
    pub skv_bytes: usize,
    pub disparity_bytes: usize,
    pub residual_bytes: usize,
    pub other_bytes: usize,
    pub bpp: f64,
}

impl BitAccounting {
    pub fn share(&self, bytes: usize) -> f64 {
        bytes as f64 / self.total_bytes as f64
    }

    /// Fraction of the stream spent on key views and the disparity map.
    pub fn side_share(&self) -> f64 {
        self.share(self.skv_bytes + self.disparity_bytes)
    }
}

/// Per-section sizes of a parsed stream. Rate is total bits over the pixels
/// of the evaluated luma views.
pub fn bit_accounting(stream: &Stream) -> BitAccounting {
    let size = |id: u8| stream.sections.iter().filter(|s| s.id == id).map(|s| s.data.len()).sum::<usize>();
    let all: usize = stream.sections.iter().map(|s| s.data.len()).sum();
    let (skv, disp, res) = (size(SECTION_SKV), size(SECTION_DISPARITY), size(SECTION_RESIDUAL));
    let total = stream.header_len + all;
    let h = &stream.header;
    let pixels = usize::from(h.width) * usize::from(h.height) * usize::from(h.eval_views).max(1);
    BitAccounting {
        total_bytes: total,
        header_bytes: stream.header_len,
        skv_bytes: skv,
        disparity_bytes: disp,
        residual_bytes: res,
        other_bytes: all - skv - disp - res,
        bpp: total as f64 * 8.0 / pixels as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> StreamHeader {
        StreamHeader {
            angular_rows: 15,
            angular_cols: 15,
            width: 64,
            height: 48,
            chroma_mode: 1,
            patch_size: 8,
            stride: 4,
            epsilon: 5.0,
            max_coeffs: 30,
            levels: (0..21).map(|i| -3.0 + 0.3 * i as f32).collect(),
            skv_views: vec![(7, 7), (1, 7), (7, 1), (7, 13), (13, 7)],
            q_skv: 30,
            q_res: 34,
            dict_hash: 0x0123_4567_89ab_cdef,
            eval_views: 165,
            mode: StreamMode::Full,
        }
    }

    #[test]
    fn round_trip_and_accounting() {
        let skv = vec![1u8; 100];
        let disp = vec![2u8; 7];
        let bytes = write_stream(&header(), &[(SECTION_SKV, &skv), (SECTION_DISPARITY, &disp), (SECTION_RESIDUAL, &[])]).unwrap();
        let s = read_stream(&bytes).unwrap();
        assert_eq!(s.header, header());
        assert_eq!(s.section(SECTION_SKV).unwrap(), &skv[..]);
        assert_eq!(s.section(SECTION_RESIDUAL).unwrap(), &[] as &[u8]);
        let acc = bit_accounting(&s);
        assert_eq!(acc.total_bytes, bytes.len());
        assert_eq!(acc.header_bytes + acc.skv_bytes + acc.disparity_bytes + acc.residual_bytes, bytes.len());
        assert_eq!(acc.residual_bytes, 0);
        assert!((acc.bpp - bytes.len() as f64 * 8.0 / (64.0 * 48.0 * 165.0)).abs() < 1e-12);
    }

    #[test]
    fn any_header_byte_flip_is_caught() {
        let bytes = write_stream(&header(), &[(SECTION_SKV, &[9, 9, 9])]).unwrap();
        let s = read_stream(&bytes).unwrap();
        for i in 0..s.header_len {
            let mut b = bytes.clone();
            b[i] ^= 0x10;
            assert!(read_stream(&b).is_err(), "byte {i}");
        }
    }

    #[test]
    fn section_damage_and_truncation_are_caught() {
        let bytes = write_stream(&header(), &[(SECTION_SKV, &[1, 2, 3, 4]), (SECTION_RESIDUAL, &[5, 6])]).unwrap();
        let mut b = bytes.clone();
        let last = b.len() - 1;
        b[last] ^= 1;
        assert!(matches!(read_stream(&b), Err(Error::Corrupt(_))));
        for cut in [3, 20, bytes.len() - 1] {
            assert!(read_stream(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn unknown_sections_are_skipped() {
        let bytes = write_stream(&header(), &[(42, &[7; 10]), (SECTION_DISPARITY, &[3])]).unwrap();
        let s = read_stream(&bytes).unwrap();
        assert_eq!(s.section(SECTION_DISPARITY).unwrap(), &[3]);
        assert_eq!(bit_accounting(&s).other_bytes, 10);
        assert!(write_stream(&header(), &[(1, &[]), (1, &[])]).is_err());
    }
}
