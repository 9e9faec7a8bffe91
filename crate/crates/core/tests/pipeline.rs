use std::sync::OnceLock;

use lfsc_core::bitstream::{read_stream, StreamMode, SECTION_RESIDUAL};
use lfsc_core::codec::{decode, encode, EncoderConfig};
use lfsc_core::dictionary::{build_dictionary, canvas_size_for, dct_fallback_atoms, default_disparity_grid, LfDictionary};
use lfsc_core::disparity::{build_cost_volume, winner_take_all, DEFAULT_RADIUS};
use lfsc_core::eval::{bd_metrics, psnr_lf, rd_sweep, RdPoint};
use lfsc_core::lf::LightField;
use lfsc_core::synth::{render, standard_suite, SynthSceneSpec};
use lfsc_core::Error;

fn dict() -> &'static LfDictionary {
    static D: OnceLock<LfDictionary> = OnceLock::new();
    D.get_or_init(|| {
        let grid = default_disparity_grid();
        build_dictionary(dct_fallback_atoms(400, canvas_size_for(&grid, 8), 8).unwrap(), grid, 8).unwrap()
    })
}

fn small_scene() -> LightField {
    render(&SynthSceneSpec::two_plane(32, 32, 15, -0.3, 0.9, 8)).unwrap().lf
}

#[test]
fn damaged_streams_fail_with_the_right_error() {
    let lf = small_scene();
    let enc = encode(&lf, Some(dict()), &EncoderConfig::default()).unwrap();

    let mut header = enc.bytes.clone();
    header[8] ^= 0x10;
    assert!(matches!(decode(&header, Some(dict())), Err(Error::Format(_))));

    let stream = read_stream(&enc.bytes).unwrap();
    let res = stream.sections.iter().find(|s| s.id == SECTION_RESIDUAL).unwrap();
    let mut body = enc.bytes.clone();
    body[res.offset + res.data.len() / 2] ^= 0x01;
    assert!(matches!(decode(&body, Some(dict())), Err(Error::Corrupt(_))));

    assert!(matches!(decode(&enc.bytes, None), Err(Error::HashMismatch { actual: 0, .. })));
    let grid = default_disparity_grid();
    let other = build_dictionary(dct_fallback_atoms(100, canvas_size_for(&grid, 8), 8).unwrap(), grid, 8).unwrap();
    assert!(matches!(decode(&enc.bytes, Some(&other)), Err(Error::HashMismatch { .. })));
}

#[test]
fn non_default_masks_and_grids_are_rejected_by_the_encoder() {
    let lf = small_scene();
    let mut valid = lf.valid_mask().to_vec();
    valid[7 * 15 + 7] = false;
    let masked = LightField::new(15, 15, lf.views().to_vec(), valid).unwrap();
    assert!(encode(&masked, Some(dict()), &EncoderConfig::default()).is_err());

    let small = render(&SynthSceneSpec::single_plane(16, 16, 9, 0.3, 1)).unwrap().lf;
    assert!(encode(&small, Some(dict()), &EncoderConfig::default()).is_err());
    // Baseline has no region structure and accepts other grid sizes.
    let cfg = EncoderConfig { mode: StreamMode::Baseline, ..Default::default() };
    let enc = encode(&small, None, &cfg).unwrap();
    assert_eq!(decode(&enc.bytes, None).unwrap().lf.views().len(), 81);
}

#[test]
fn psnr_ignores_the_order_of_valid_views() {
    let a = small_scene();
    let b = render(&SynthSceneSpec::two_plane(32, 32, 15, -0.3, 0.9, 9)).unwrap().lf;
    let swap = |lf: &LightField| {
        let mut views = lf.views().to_vec();
        views.swap(15 + 3, 13 * 15 + 11);
        views.swap(7 * 15 + 7, 4 * 15 + 2);
        LightField::new(15, 15, views, lf.valid_mask().to_vec()).unwrap()
    };
    assert_eq!(psnr_lf(&a, &b).unwrap(), psnr_lf(&swap(&a), &swap(&b)).unwrap());
}

#[test]
fn bd_metrics_are_antisymmetric_on_real_sweeps() {
    let lf = small_scene();
    let qs = [24, 30, 36, 42];
    let full = rd_sweep(&lf, Some(dict()), &qs, &EncoderConfig::default()).unwrap();
    let base_cfg = EncoderConfig { mode: StreamMode::Baseline, ..Default::default() };
    let base = rd_sweep(&lf, None, &qs, &base_cfg).unwrap();
    let ab = bd_metrics(&base, &full).unwrap();
    let ba = bd_metrics(&full, &base).unwrap();
    assert!((ab.bd_psnr + ba.bd_psnr).abs() <= 0.01, "{ab:?} vs {ba:?}");
}

fn psnr_at(points: &[RdPoint], bpp: f64) -> f64 {
    let w = points.windows(2).find(|w| w[0].bpp <= bpp && bpp <= w[1].bpp).expect("rate inside curve");
    let t = (bpp.ln() - w[0].bpp.ln()) / (w[1].bpp.ln() - w[0].bpp.ln());
    w[0].psnr_yuv + t * (w[1].psnr_yuv - w[0].psnr_yuv)
}

#[test]
fn full_mode_wins_at_the_two_lowest_matched_rates() {
    let (_, spec) = standard_suite().into_iter().next().unwrap();
    let lf = render(&spec).unwrap().lf;
    let qs = [30, 34, 38, 42, 46, 51];
    let full = rd_sweep(&lf, Some(dict()), &qs, &EncoderConfig::default()).unwrap();
    let base_cfg = EncoderConfig { mode: StreamMode::Baseline, ..Default::default() };
    let base = rd_sweep(&lf, None, &qs, &base_cfg).unwrap();
    let inside: Vec<&RdPoint> = full.iter().filter(|p| p.bpp >= base[0].bpp && p.bpp <= base.last().unwrap().bpp).collect();
    assert!(inside.len() >= 2);
    for p in &inside[..2] {
        assert!(p.psnr_yuv >= psnr_at(&base, p.bpp), "at {} bpp", p.bpp);
    }
}

#[test]
fn two_plane_pixel_disparity_matches_the_label_map() {
    let spec = SynthSceneSpec::two_plane(64, 64, 15, 0.0, 2.1, 21);
    let out = render(&spec).unwrap();
    let grid = default_disparity_grid();
    let level_of = |d: f64| grid.iter().position(|&g| (g - d).abs() < 1e-6).unwrap() as u16;
    let truth = [level_of(0.0), level_of(2.1)];
    let pix = winner_take_all(&build_cost_volume(&out.lf, &grid, DEFAULT_RADIUS).unwrap());
    let confident: Vec<usize> = (0..pix.levels.len()).filter(|&i| pix.confidence[i] >= 0.5).collect();
    let hits = confident.iter().filter(|&&i| pix.levels[i] == truth[usize::from(out.labels[i])]).count();
    assert!(confident.len() > pix.levels.len() / 2);
    assert!(hits as f64 >= 0.9 * confident.len() as f64, "{hits}/{}", confident.len());
}
