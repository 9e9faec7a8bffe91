use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lfsc_core::bitstream::{bit_accounting, read_stream, BitAccounting, StreamMode};
use lfsc_core::codec::{self, EncoderConfig};
use lfsc_core::coder::CoderParams;
use lfsc_core::dictionary::{
    atoms_from_canvases, build_dictionary, canvas_size_for, dct_fallback_atoms, default_disparity_grid,
    extract_training_patches, load_lfd, save_lfd, train_ksvd, LfDictionary, DEFAULT_ATOMS, DEFAULT_PATCH,
    DEFAULT_SPARSITY,
};
use lfsc_core::disparity::{center_view, dump_map, estimate_disparity, DEFAULT_RADIUS};
use lfsc_core::eval::{self, RdPoint};
use lfsc_core::lf::{load_lf, load_luma_image, save_lf, Channel, LightField, PatchGrid, Plane, MANIFEST_FILE};
use lfsc_core::synth::{render, standard_suite, write_scene, SynthSceneSpec};
use serde::Serialize;

use crate::config::{pick, Config};
use crate::{ArgError, CoderArgs, DecodeArgs, DisparityArgs, EncodeArgs, EvalArgs, SynthArgs, TrainArgs};

pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_TRAIN_PATCHES: usize = 5000;

pub struct Ctx {
    pub config: Config,
    pub json: bool,
}

impl Ctx {
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        } else {
            print!("{}", text());
        }
        Ok(())
    }

    fn encoder_config(&self, a: &CoderArgs) -> EncoderConfig {
        let c = &self.config;
        let d = EncoderConfig::default();
        EncoderConfig {
            q_skv: pick(a.q_skv, c.q_skv, d.q_skv),
            q_res: pick(a.q_res, c.q_res, d.q_res),
            params: CoderParams {
                epsilon: pick(a.epsilon, c.epsilon, d.params.epsilon),
                max_coeffs: pick(a.max_coeffs, c.max_coeffs, d.params.max_coeffs),
                stride: pick(a.stride, c.stride, d.params.stride),
            },
            layout: d.layout,
            radius: pick(a.radius, c.radius, d.radius),
            mode: if a.baseline { StreamMode::Baseline } else { StreamMode::Full },
        }
    }

    fn dictionary(&self, flag: Option<&Path>) -> Result<Option<LfDictionary>> {
        match self.config.dict_path(flag) {
            Some(p) => Ok(Some(load_lfd(&p).with_context(|| format!("loading dictionary {}", p.display()))?)),
            None => Ok(None),
        }
    }

    fn require_dictionary(&self, flag: Option<&Path>) -> Result<LfDictionary> {
        self.dictionary(flag)?.ok_or_else(|| {
            ArgError(format!("no dictionary: pass --dict, set it in the config or set {}", crate::config::DICT_ENV))
                .into()
        })
    }
}

#[derive(Serialize)]
struct DictReport {
    path: PathBuf,
    atoms: usize,
    levels: usize,
    canvas: usize,
    patch: usize,
    logical_rows: usize,
    logical_cols: usize,
    hash: String,
    objective: Vec<f64>,
}

fn center_luma(lf: &LightField) -> Plane {
    let (s, t) = center_view(lf);
    lf.plane(s, t, Channel::Y).clone()
}

/// Center-view luma of every light field and the luma of every PNG under
/// `dir`, in sorted path order.
fn collect_corpus(dir: &Path, out: &mut Vec<Plane>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading corpus {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            if p.join(MANIFEST_FILE).exists() {
                out.push(center_luma(&load_lf(&p)?));
            } else {
                collect_corpus(&p, out)?;
            }
            continue;
        }
        match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("png") => out.push(load_luma_image(&p)?),
            Some("lfraw") => out.push(center_luma(&load_lf(&p)?)),
            _ => {}
        }
    }
    Ok(())
}

pub fn train_dict(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let t = &ctx.config.train;
    let k_c = pick(a.atoms, t.atoms, DEFAULT_ATOMS);
    let grid = default_disparity_grid();
    let canvas = canvas_size_for(&grid, DEFAULT_PATCH);
    let (atoms, objective) = if a.dct_fallback {
        (dct_fallback_atoms(k_c, canvas, DEFAULT_PATCH)?, Vec::new())
    } else {
        let corpus = a.corpus.as_deref().expect("clap requires --corpus");
        let mut planes = Vec::new();
        collect_corpus(corpus, &mut planes)?;
        if planes.is_empty() {
            bail!(ArgError(format!("no PNG images or light fields under {}", corpus.display())));
        }
        let seed = pick(a.seed, t.seed, 0);
        let count = pick(a.patches, t.patches, DEFAULT_TRAIN_PATCHES);
        let patches = extract_training_patches(&planes, canvas, count, seed);
        let out = train_ksvd(
            &patches,
            k_c,
            pick(a.sparsity, t.sparsity, DEFAULT_SPARSITY),
            pick(a.iterations, t.iterations, DEFAULT_ITERATIONS),
            seed,
        )?;
        (atoms_from_canvases(out.atoms, canvas, DEFAULT_PATCH)?, out.objective)
    };
    let dict = build_dictionary(atoms, grid, DEFAULT_PATCH)?;
    save_lfd(&dict, &a.out)?;
    let (rows, cols) = dict.logical_dims();
    let report = DictReport {
        path: a.out,
        atoms: dict.num_atoms(),
        levels: dict.num_levels(),
        canvas: dict.canvas_size(),
        patch: dict.patch_size(),
        logical_rows: rows,
        logical_cols: cols,
        hash: format!("{:016x}", dict.content_hash()),
        objective,
    };
    ctx.emit(&report, || {
        format!(
            "wrote {}: {} atoms x {} levels, logical {}x{}, hash {}\n",
            report.path.display(),
            report.atoms,
            report.levels,
            rows,
            cols,
            report.hash
        )
    })
}

fn accounting_text(a: &BitAccounting) -> String {
    let mut s = format!("total      {:>9} bytes  {:.4} bpp\n", a.total_bytes, a.bpp);
    for (name, n) in [
        ("header", a.header_bytes),
        ("skv", a.skv_bytes),
        ("disparity", a.disparity_bytes),
        ("residual", a.residual_bytes),
        ("other", a.other_bytes),
    ] {
        s += &format!("  {name:<9}{n:>9} bytes  {:5.1}%\n", 100.0 * a.share(n));
    }
    s
}

fn psnr_text(p: &[f64; 3], yuv: f64) -> String {
    format!("PSNR Y {:.3} U {:.3} V {:.3} YUV {:.3} dB\n", p[0], p[1], p[2], yuv)
}

pub fn encode(ctx: &Ctx, a: EncodeArgs) -> Result<()> {
    let cfg = ctx.encoder_config(&a.coder);
    let lf = load_lf(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let dict = match cfg.mode {
        StreamMode::Full => Some(ctx.require_dictionary(a.coder.dict.as_deref())?),
        StreamMode::Baseline => None,
    };
    let enc = codec::encode(&lf, dict.as_ref(), &cfg)?;
    fs::write(&a.out, &enc.bytes).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(r) = &a.recon {
        save_lf(&enc.recon, r)?;
    }
    ctx.emit(&enc.stats, || accounting_text(&enc.stats.accounting) + &psnr_text(&enc.stats.psnr, enc.stats.psnr_yuv))
}

pub fn decode(ctx: &Ctx, a: DecodeArgs) -> Result<()> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let stream = read_stream(&bytes)?;
    let dict = match stream.header.mode {
        StreamMode::Full => ctx.dictionary(a.dict.as_deref())?,
        StreamMode::Baseline => None,
    };
    let dec = codec::decode_stream(&stream, dict.as_ref())?;
    save_lf(&dec.lf, &a.out)?;
    let acc = bit_accounting(&stream);
    ctx.emit(&acc, || format!("decoded {} views to {}\n", dec.lf.views().len(), a.out.display()))
}

fn synth_spec(a: &SynthArgs) -> Result<SynthSceneSpec> {
    if let Some(p) = &a.spec {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        return serde_json::from_str(&text).map_err(|e| ArgError(format!("scene spec {}: {e}", p.display())).into());
    }
    let mut spec = SynthSceneSpec::single_plane(a.width, a.height, a.views, a.disparity, a.seed);
    spec.noise_sigma = a.noise;
    spec.noise_seed = a.seed;
    if let Some(front) = a.front {
        let two = SynthSceneSpec::two_plane(a.width, a.height, a.views, a.disparity, front, a.seed);
        spec.planes = two.planes;
    }
    Ok(spec)
}

pub fn synth(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let scenes: Vec<(String, SynthSceneSpec, PathBuf)> = if a.suite {
        standard_suite().into_iter().map(|(n, s)| (n.to_string(), s, a.out.join(n))).collect()
    } else {
        vec![("scene".into(), synth_spec(&a)?, a.out.clone())]
    };
    let mut written = Vec::new();
    for (name, spec, dir) in scenes {
        let out = render(&spec).map_err(|e| ArgError(e.to_string()))?;
        write_scene(&spec, &out, &dir)?;
        written.push((name, dir));
    }
    ctx.emit(&written, || written.iter().map(|(n, d)| format!("{n}: {}\n", d.display())).collect())
}

fn point_from_recon(q: u8, orig: &LightField, recon: &LightField, acc: Option<&BitAccounting>) -> Result<RdPoint> {
    let p = eval::psnr_lf(orig, recon)?;
    let zero = BitAccounting::default();
    let a = acc.unwrap_or(&zero);
    Ok(RdPoint {
        q,
        bpp: a.bpp,
        psnr_y: p[0],
        psnr_u: p[1],
        psnr_v: p[2],
        psnr_yuv: eval::psnr_yuv(p[0], p[1], p[2]),
        total_bytes: a.total_bytes,
        skv_bytes: a.skv_bytes,
        disparity_bytes: a.disparity_bytes,
        residual_bytes: a.residual_bytes,
    })
}

fn rows_text(points: &[RdPoint]) -> String {
    let mut s = String::from("q,bpp,psnr_y,psnr_u,psnr_v,psnr_yuv,total_bytes,skv_bytes,disparity_bytes,residual_bytes\n");
    for p in points {
        s += &format!(
            "{},{:.6},{:.4},{:.4},{:.4},{:.4},{},{},{},{}\n",
            p.q, p.bpp, p.psnr_y, p.psnr_u, p.psnr_v, p.psnr_yuv, p.total_bytes, p.skv_bytes, p.disparity_bytes, p.residual_bytes
        );
    }
    s
}

pub fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    if let Some(files) = &a.bd {
        let anchor = eval::read_csv(&files[0])?;
        let test = eval::read_csv(&files[1])?;
        let bd = eval::bd_metrics(&anchor, &test)?;
        return ctx.emit(&bd, || {
            format!(
                "BD-PSNR {:+.4} dB  BD-rate {:+.3}%{}\n",
                bd.bd_psnr,
                bd.bd_rate,
                if bd.linear_fallback { "  (piecewise-linear fallback)" } else { "" }
            )
        });
    }
    let orig_path = a.orig.as_deref().expect("clap requires --orig");
    let orig = load_lf(orig_path).with_context(|| format!("loading {}", orig_path.display()))?;
    let points = if let Some(r) = &a.recon {
        vec![point_from_recon(0, &orig, &load_lf(r)?, None)?]
    } else if let Some(s) = &a.stream {
        let bytes = fs::read(s).with_context(|| format!("reading {}", s.display()))?;
        let stream = read_stream(&bytes)?;
        let dict = match stream.header.mode {
            StreamMode::Full => ctx.dictionary(a.coder.dict.as_deref())?,
            StreamMode::Baseline => None,
        };
        let dec = codec::decode_stream(&stream, dict.as_ref())?;
        vec![point_from_recon(stream.header.q_res, &orig, &dec.lf, Some(&bit_accounting(&stream)))?]
    } else if let Some(qs) = &a.sweep {
        if qs.is_empty() {
            bail!(ArgError("--sweep needs at least one q".into()));
        }
        let cfg = ctx.encoder_config(&a.coder);
        let dict = match cfg.mode {
            StreamMode::Full => Some(ctx.require_dictionary(a.coder.dict.as_deref())?),
            StreamMode::Baseline => None,
        };
        eval::rd_sweep(&orig, dict.as_ref(), qs, &cfg)?
    } else {
        bail!(ArgError("eval needs one of --recon, --stream, --sweep or --bd".into()));
    };
    if let Some(p) = &a.csv {
        eval::write_csv(&points, p)?;
    }
    if let Some(p) = &a.dat {
        eval::write_dat(&points, p)?;
    }
    ctx.emit(&points, || rows_text(&points))
}

#[derive(Serialize)]
struct DisparityReport {
    nx: usize,
    ny: usize,
    histogram: Vec<usize>,
    mean_confidence: f64,
}

pub fn disparity(ctx: &Ctx, a: DisparityArgs) -> Result<()> {
    let lf = load_lf(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let grid = match ctx.dictionary(a.dict.as_deref())? {
        Some(d) => d.levels().to_vec(),
        None => default_disparity_grid(),
    };
    let stride = pick(a.stride, ctx.config.stride, CoderParams::default().stride);
    let radius = pick(a.radius, ctx.config.radius, DEFAULT_RADIUS);
    let patches = PatchGrid::new(lf.width(), lf.height(), DEFAULT_PATCH, stride)?;
    let map = estimate_disparity(&lf, &grid, &patches, radius)?;
    fs::create_dir_all(&a.out)?;
    dump_map(&map, &a.out, "disparity")?;
    let mut histogram = vec![0; grid.len()];
    for &l in &map.levels {
        histogram[usize::from(l)] += 1;
    }
    let report = DisparityReport {
        nx: map.nx,
        ny: map.ny,
        histogram,
        mean_confidence: map.confidence.iter().sum::<f64>() / map.len().max(1) as f64,
    };
    ctx.emit(&report, || {
        format!(
            "{}x{} patches, mean confidence {:.3}, maps in {}\nlevels: {:?}\n",
            report.nx,
            report.ny,
            report.mean_confidence,
            a.out.display(),
            report.histogram
        )
    })
}
