//! Encoder and decoder pipelines.
//!
//! Full mode: estimate the disparity map, code the five key views, decode
//! them again, rebuild every view by sparse coding from the decoded key
//! views and map, and code what the approximation missed. The decoder
//! repeats the reconstruction from the same decoded inputs, so both ends
//! hold the same approximation bit for bit.
//!
//! Baseline mode codes every evaluated view directly at one q.

use crate::bitstream::{
    bit_accounting, read_stream, write_stream, BitAccounting, Stream, StreamHeader, StreamMode, SECTION_DISPARITY,
    SECTION_RESIDUAL, SECTION_SKV,
};
use crate::coder::{approximate_lf, CoderParams, SkvLayout, GRID_SIDE};
use crate::dictionary::LfDictionary;
use crate::disparity::{estimate_disparity, DisparityMap, DEFAULT_RADIUS};
use crate::error::{Error, Result};
use crate::eval::{psnr_lf, psnr_yuv};
use crate::lf::{default_valid_mask, Channel, LightField, PatchGrid, Plane, View, CHROMA_420};
use crate::residual::{decode_disparity_map, decode_sequence, encode_disparity_map, encode_sequence, Q_MAX, Q_MIN};

/// Chroma planes have half the pixel pitch, so disparities halve.
pub const CHROMA_DISPARITY_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub q_skv: u8,
    pub q_res: u8,
    pub params: CoderParams,
    pub layout: SkvLayout,
    /// Cost aggregation radius for disparity estimation.
    pub radius: usize,
    pub mode: StreamMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            q_skv: 30,
            q_res: 30,
            params: CoderParams::default(),
            layout: SkvLayout::default(),
            radius: DEFAULT_RADIUS,
            mode: StreamMode::Full,
        }
    }
}

/// Encoder-side statistics. PSNR is measured on the reconstruction the
/// decoder will produce.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EncodeStats {
    pub accounting: BitAccounting,
    pub psnr: [f64; 3],
    pub psnr_yuv: f64,
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub stats: EncodeStats,
    pub recon: LightField,
    /// Sparse-coding approximation (full mode only).
    pub approximation: Option<LightField>,
    pub map: Option<DisparityMap>,
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub header: StreamHeader,
    pub lf: LightField,
    pub approximation: Option<LightField>,
}

fn check_q(q: u8, what: &str) -> Result<()> {
    if (Q_MIN..=Q_MAX).contains(&q) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} = {q} outside {Q_MIN}..={Q_MAX}")))
    }
}

/// Evaluated views in serpentine order: even rows left to right, odd rows
/// right to left, skipping `exclude`.
pub fn serpentine_order(rows: usize, cols: usize, mask: &[bool], exclude: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in 0..rows {
        let ts: Vec<usize> = if s % 2 == 0 { (0..cols).collect() } else { (0..cols).rev().collect() };
        for t in ts {
            if mask[s * cols + t] && !exclude.contains(&(s, t)) {
                out.push((s, t));
            }
        }
    }
    out
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::invalid(format!("{what} {v} exceeds the container limit")))
}

fn check_input(lf: &LightField) -> Result<()> {
    if lf.valid_mask() != default_valid_mask(lf.rows(), lf.cols()).as_slice() {
        return Err(Error::invalid("the container assumes the default evaluation mask"));
    }
    to_u16(lf.width(), "width")?;
    to_u16(lf.height(), "height")?;
    Ok(())
}

fn base_header(lf: &LightField, cfg: &EncoderConfig, dict: Option<&LfDictionary>, q_res: u8) -> Result<StreamHeader> {
    Ok(StreamHeader {
        angular_rows: to_u16(lf.rows(), "angular rows")?,
        angular_cols: to_u16(lf.cols(), "angular cols")?,
        width: to_u16(lf.width(), "width")?,
        height: to_u16(lf.height(), "height")?,
        chroma_mode: CHROMA_420,
        patch_size: dict.map_or(0, |d| d.patch_size() as u8),
        stride: if dict.is_some() { cfg.params.stride as u8 } else { 0 },
        epsilon: cfg.params.epsilon as f32,
        max_coeffs: to_u16(cfg.params.max_coeffs, "max_coeffs")?,
        levels: dict.map_or(Vec::new(), |d| d.levels().iter().map(|&l| l as f32).collect()),
        skv_views: if dict.is_some() {
            cfg.layout.views.iter().map(|&(s, t)| (s as u8, t as u8)).collect()
        } else {
            Vec::new()
        },
        q_skv: if dict.is_some() { cfg.q_skv } else { 0 },
        q_res,
        dict_hash: dict.map_or(0, |d| d.content_hash()),
        eval_views: to_u16(lf.num_valid(), "evaluated views")?,
        mode: if dict.is_some() { StreamMode::Full } else { StreamMode::Baseline },
    })
}

/// The q_res-independent half of a full-mode encode: coded key views,
/// coded map and the approximation built from their decoded forms.
#[derive(Debug)]
pub struct Prepared<'a> {
    lf: &'a LightField,
    cfg: EncoderConfig,
    header: StreamHeader,
    skv_bytes: Vec<u8>,
    map_bytes: Vec<u8>,
    skvs: Vec<View>,
    pub map: DisparityMap,
    pub approximation: LightField,
}

pub fn prepare<'a>(lf: &'a LightField, dict: &LfDictionary, cfg: &EncoderConfig) -> Result<Prepared<'a>> {
    check_input(lf)?;
    check_q(cfg.q_skv, "q_skv")?;
    cfg.layout.validate()?;
    if (lf.rows(), lf.cols()) != (GRID_SIDE, GRID_SIDE) {
        return Err(Error::invalid(format!("full mode needs a {GRID_SIDE}x{GRID_SIDE} light field")));
    }
    let header = base_header(lf, cfg, Some(dict), cfg.q_res)?;

    let grid = PatchGrid::new(lf.width(), lf.height(), dict.patch_size(), cfg.params.stride)?;
    let map = estimate_disparity(lf, dict.levels(), &grid, cfg.radius)?;
    let map_bytes = encode_disparity_map(&map)?;
    let map_dec = decode_disparity_map(&map_bytes, dict.levels())?;

    let planes: Vec<(u16, &Plane)> = cfg
        .layout
        .views
        .iter()
        .flat_map(|&(s, t)| Channel::ALL.map(|c| lf.plane(s, t, c)))
        .enumerate()
        .map(|(i, p)| (i as u16, p))
        .collect();
    let skv_bytes = encode_sequence(&planes, cfg.q_skv)?;
    let skvs = views_from_sequence(&skv_bytes, cfg.layout.views.len())?;

    let chroma = dict.scaled(CHROMA_DISPARITY_SCALE);
    let approximation = approximate_lf(&skvs, &cfg.layout, dict, &chroma, &map_dec, &cfg.params)?;
    Ok(Prepared {
        lf,
        cfg: *cfg,
        header,
        skv_bytes,
        map_bytes,
        skvs,
        map,
        approximation,
    })
}

fn views_from_sequence(bytes: &[u8], n: usize) -> Result<Vec<View>> {
    let planes = decode_sequence(bytes)?;
    if planes.len() != 3 * n || planes.iter().enumerate().any(|(i, (id, _))| usize::from(*id) != i) {
        return Err(Error::corrupt("view sequence does not hold the expected planes"));
    }
    let mut it = planes.into_iter().map(|(_, p)| p);
    (0..n)
        .map(|_| View::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::corrupt(format!("decoded view: {e}")))
}

fn residual_plane(orig: &Plane, approx: &Plane) -> Plane {
    let data = orig
        .data
        .iter()
        .zip(&approx.data)
        .map(|(&o, &a)| (i32::from(o) - i32::from(a) + 128).clamp(0, 255) as u8)
        .collect();
    Plane { width: orig.width, height: orig.height, data }
}

fn add_residual(approx: &Plane, res: &Plane) -> Plane {
    let data = approx
        .data
        .iter()
        .zip(&res.data)
        .map(|(&a, &r)| (i32::from(a) + i32::from(r) - 128).clamp(0, 255) as u8)
        .collect();
    Plane { width: approx.width, height: approx.height, data }
}

/// Final views of a full-mode stream.
fn assemble_full(
    approx: &LightField,
    skvs: &[View],
    layout: &SkvLayout,
    residual_bytes: &[u8],
) -> Result<LightField> {
    let order = serpentine_order(approx.rows(), approx.cols(), approx.valid_mask(), &layout.views);
    let res = views_from_sequence(residual_bytes, order.len())?;
    let mut out = approx.clone();
    for (view, (s, t)) in res.iter().zip(&order) {
        let target = out.view_mut(*s, *t);
        for c in Channel::ALL {
            let sum = add_residual(target.plane(c), view.plane(c));
            *target.plane_mut(c) = sum;
        }
    }
    for (v, &(s, t)) in skvs.iter().zip(&layout.views) {
        *out.view_mut(s, t) = v.clone();
    }
    Ok(out)
}

impl Prepared<'_> {
    /// Codes the residuals at `q_res` and assembles the stream.
    pub fn finish(&self, q_res: u8) -> Result<Encoded> {
        check_q(q_res, "q_res")?;
        let lf = self.lf;
        let order = serpentine_order(lf.rows(), lf.cols(), lf.valid_mask(), &self.cfg.layout.views);
        let residuals: Vec<Plane> = order
            .iter()
            .flat_map(|&(s, t)| Channel::ALL.map(|c| residual_plane(lf.plane(s, t, c), self.approximation.plane(s, t, c))))
            .collect();
        let items: Vec<(u16, &Plane)> = residuals.iter().enumerate().map(|(i, p)| (i as u16, p)).collect();
        let res_bytes = encode_sequence(&items, q_res)?;
        let recon = assemble_full(&self.approximation, &self.skvs, &self.cfg.layout, &res_bytes)?;

        let header = StreamHeader { q_res, ..self.header.clone() };
        let bytes = write_stream(
            &header,
            &[
                (SECTION_SKV, &self.skv_bytes),
                (SECTION_DISPARITY, &self.map_bytes),
                (SECTION_RESIDUAL, &res_bytes),
            ],
        )?;
        finish_encoded(lf, bytes, recon, Some(self.approximation.clone()), Some(self.map.clone()))
    }
}

fn finish_encoded(
    lf: &LightField,
    bytes: Vec<u8>,
    recon: LightField,
    approximation: Option<LightField>,
    map: Option<DisparityMap>,
) -> Result<Encoded> {
    let stream = read_stream(&bytes)?;
    let psnr = psnr_lf(lf, &recon)?;
    let stats = EncodeStats {
        accounting: bit_accounting(&stream),
        psnr,
        psnr_yuv: psnr_yuv(psnr[0], psnr[1], psnr[2]),
    };
    Ok(Encoded { bytes, stats, recon, approximation, map })
}

/// Codes every evaluated view directly at `q`.
pub fn encode_baseline(lf: &LightField, q: u8) -> Result<Encoded> {
    check_input(lf)?;
    check_q(q, "q")?;
    let header = base_header(lf, &EncoderConfig::default(), None, q)?;
    let order = serpentine_order(lf.rows(), lf.cols(), lf.valid_mask(), &[]);
    let items: Vec<(u16, &Plane)> = order
        .iter()
        .flat_map(|&(s, t)| Channel::ALL.map(|c| lf.plane(s, t, c)))
        .enumerate()
        .map(|(i, p)| (i as u16, p))
        .collect();
    let res_bytes = encode_sequence(&items, q)?;
    let recon = assemble_baseline(lf.rows(), lf.cols(), lf.width(), lf.height(), &res_bytes)?;
    let bytes = write_stream(&header, &[(SECTION_RESIDUAL, &res_bytes)])?;
    finish_encoded(lf, bytes, recon, None, None)
}

fn assemble_baseline(rows: usize, cols: usize, w: usize, h: usize, bytes: &[u8]) -> Result<LightField> {
    let mut out = LightField::uniform(rows, cols, w, h, [128, 128, 128]);
    let order = serpentine_order(rows, cols, out.valid_mask(), &[]);
    let views = views_from_sequence(bytes, order.len())?;
    for (v, (s, t)) in views.into_iter().zip(order) {
        if (v.planes[0].width, v.planes[0].height) != (w, h) {
            return Err(Error::corrupt("decoded view size differs from the header"));
        }
        *out.view_mut(s, t) = v;
    }
    Ok(out)
}

/// Encodes in the configured mode. `dict` is required for full mode.
pub fn encode(lf: &LightField, dict: Option<&LfDictionary>, cfg: &EncoderConfig) -> Result<Encoded> {
    match cfg.mode {
        StreamMode::Full => {
            let dict = dict.ok_or_else(|| Error::invalid("full mode needs a dictionary"))?;
            prepare(lf, dict, cfg)?.finish(cfg.q_res)
        }
        StreamMode::Baseline => encode_baseline(lf, cfg.q_res),
    }
}

/// Fails with `HashMismatch` unless `dict` is the dictionary the stream was
/// coded with. Called before any section is decoded.
pub fn check_dictionary(header: &StreamHeader, dict: &LfDictionary) -> Result<()> {
    if header.dict_hash != dict.content_hash() {
        return Err(Error::HashMismatch {
            expected: header.dict_hash,
            actual: dict.content_hash(),
        });
    }
    Ok(())
}

fn full_params(h: &StreamHeader, dict: &LfDictionary) -> Result<(CoderParams, SkvLayout)> {
    if (h.angular_rows as usize, h.angular_cols as usize) != (GRID_SIDE, GRID_SIDE) || h.chroma_mode != CHROMA_420 {
        return Err(Error::format("unsupported angular grid or chroma mode"));
    }
    if usize::from(h.patch_size) != dict.patch_size()
        || h.levels.len() != dict.num_levels()
        || h.levels.iter().zip(dict.levels()).any(|(&a, &b)| a != b as f32)
    {
        return Err(Error::format("header coding parameters disagree with the dictionary"));
    }
    if h.stride == 0 || h.stride > h.patch_size || !h.epsilon.is_finite() || h.epsilon < 0.0 {
        return Err(Error::format("invalid stride or epsilon in header"));
    }
    let views: [(usize, usize); 5] = h
        .skv_views
        .iter()
        .map(|&(s, t)| (usize::from(s), usize::from(t)))
        .collect::<Vec<_>>()
        .try_into()
        .map_err(|_| Error::format("expected five key views"))?;
    let layout = SkvLayout { views };
    layout.validate().map_err(|e| Error::format(e.to_string()))?;
    let params = CoderParams {
        epsilon: f64::from(h.epsilon),
        max_coeffs: usize::from(h.max_coeffs),
        stride: usize::from(h.stride),
    };
    Ok((params, layout))
}

fn missing(id: u8) -> Error {
    Error::corrupt(format!("stream lacks section {id}"))
}

/// Decodes a stream. Full-mode streams need the dictionary they were coded
/// with; baseline streams ignore it.
pub fn decode(bytes: &[u8], dict: Option<&LfDictionary>) -> Result<Decoded> {
    let stream = read_stream(bytes)?;
    decode_stream(&stream, dict)
}

pub fn decode_stream(stream: &Stream, dict: Option<&LfDictionary>) -> Result<Decoded> {
    let h = &stream.header;
    let (rows, cols, w, hgt) = (
        usize::from(h.angular_rows),
        usize::from(h.angular_cols),
        usize::from(h.width),
        usize::from(h.height),
    );
    if rows == 0 || cols == 0 || w == 0 || hgt == 0 {
        return Err(Error::format("empty dimensions in header"));
    }
    let residual = stream.section(SECTION_RESIDUAL).ok_or_else(|| missing(SECTION_RESIDUAL))?;
    match h.mode {
        StreamMode::Baseline => Ok(Decoded {
            header: h.clone(),
            lf: assemble_baseline(rows, cols, w, hgt, residual)?,
            approximation: None,
        }),
        StreamMode::Full => {
            // No dictionary is reported like the wrong one; 0 stands for "none".
            let dict = dict.ok_or(Error::HashMismatch { expected: h.dict_hash, actual: 0 })?;
            check_dictionary(h, dict)?;
            let (params, layout) = full_params(h, dict)?;
            let skv_bytes = stream.section(SECTION_SKV).ok_or_else(|| missing(SECTION_SKV))?;
            let map_bytes = stream.section(SECTION_DISPARITY).ok_or_else(|| missing(SECTION_DISPARITY))?;
            let map = decode_disparity_map(map_bytes, dict.levels())?;
            let skvs = views_from_sequence(skv_bytes, layout.views.len())?;
            if skvs.iter().any(|v| (v.planes[0].width, v.planes[0].height) != (w, hgt)) {
                return Err(Error::corrupt("key view size differs from the header"));
            }
            let chroma = dict.scaled(CHROMA_DISPARITY_SCALE);
            let approx = approximate_lf(&skvs, &layout, dict, &chroma, &map, &params)?;
            let lf = assemble_full(&approx, &skvs, &layout, residual)?;
            Ok(Decoded { header: h.clone(), lf, approximation: Some(approx) })
        }
    }
}
