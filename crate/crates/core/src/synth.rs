//! Procedural light fields with known disparity, used as test oracles.
//!
//! A scene is a stack of fronto-parallel textured planes listed back to
//! front. Each plane has one unit disparity and an optional rectangle in
//! center-view coordinates; the background plane has none. View `(s, t)`
//! sees the scene point `(x + dp (s - cs), y + dp (t - ct))` of each plane,
//! and the front-most plane whose rectangle holds that point wins. Textures
//! are sums of sinusoids with wavelengths of at least 8 pixels, evaluated
//! analytically, so any sub-pixel shift is exact.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lf::{chroma_dims, save_lf_dir, Channel, LightField, Plane, View};

/// Shortest texture wavelength in luma pixels.
pub const MIN_WAVELENGTH: f64 = 8.0;
const MAX_WAVELENGTH: f64 = 24.0;
const COMPONENTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPlane {
    pub texture_seed: u64,
    pub disparity: f64,
    /// `[x0, y0, x1, y1]` in center-view pixels, half-open. `None` fills the
    /// whole view.
    #[serde(default)]
    pub rect: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSceneSpec {
    pub width: usize,
    pub height: usize,
    pub angular_rows: usize,
    pub angular_cols: usize,
    /// Back to front.
    pub planes: Vec<SynthPlane>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_seed: u64,
}

/// Rendered scene plus ground truth for the center view.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub lf: LightField,
    /// Index of the visible plane per center-view luma pixel.
    pub labels: Vec<u8>,
}

impl SynthOutput {
    /// Unit disparity per center-view luma pixel.
    pub fn disparity(&self, spec: &SynthSceneSpec) -> Vec<f64> {
        self.labels.iter().map(|&l| spec.planes[usize::from(l)].disparity).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Wave {
    amp: f64,
    kx: f64,
    ky: f64,
    phase: f64,
}

#[derive(Debug, Clone)]
struct Texture {
    channels: [Vec<Wave>; 3],
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut waves = |total: f64| -> Vec<Wave> {
            (0..COMPONENTS)
                .map(|_| {
                    let lambda = rng.random_range(MIN_WAVELENGTH..MAX_WAVELENGTH);
                    let theta = rng.random_range(0.0..TAU);
                    Wave {
                        amp: total / COMPONENTS as f64 * rng.random_range(0.5..1.0),
                        kx: TAU / lambda * theta.cos(),
                        ky: TAU / lambda * theta.sin(),
                        phase: rng.random_range(0.0..TAU),
                    }
                })
                .collect()
        };
        let y = waves(90.0);
        let u = waves(30.0);
        let v = waves(30.0);
        Texture { channels: [y, u, v] }
    }

    fn eval(&self, ch: usize, x: f64, y: f64) -> f64 {
        let mut v = 128.0;
        for w in &self.channels[ch] {
            v += w.amp * (w.kx * x + w.ky * y + w.phase).sin();
        }
        v
    }
}

impl SynthSceneSpec {
    /// One full-view plane.
    pub fn single_plane(width: usize, height: usize, n: usize, disparity: f64, seed: u64) -> Self {
        SynthSceneSpec {
            width,
            height,
            angular_rows: n,
            angular_cols: n,
            planes: vec![SynthPlane { texture_seed: seed, disparity, rect: None }],
            noise_sigma: 0.0,
            noise_seed: 0,
        }
    }

    /// Background plane plus a centered foreground rectangle covering the
    /// middle half of the view.
    pub fn two_plane(width: usize, height: usize, n: usize, back: f64, front: f64, seed: u64) -> Self {
        let (w, h) = (width as f64, height as f64);
        SynthSceneSpec {
            planes: vec![
                SynthPlane { texture_seed: seed, disparity: back, rect: None },
                SynthPlane {
                    texture_seed: seed.wrapping_add(1),
                    disparity: front,
                    rect: Some([w / 4.0, h / 4.0, 3.0 * w / 4.0, 3.0 * h / 4.0]),
                },
            ],
            ..Self::single_plane(width, height, n, back, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.angular_rows == 0 || self.angular_cols == 0 {
            return Err(Error::invalid("scene dimensions must be positive"));
        }
        if self.planes.is_empty() || self.planes.len() > 255 {
            return Err(Error::invalid("scene needs 1..=255 planes"));
        }
        if self.planes.iter().any(|p| !p.disparity.is_finite()) {
            return Err(Error::invalid("plane disparities must be finite"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

fn visible(spec: &SynthSceneSpec, x: f64, y: f64, ds: f64, dt: f64) -> usize {
    for (i, p) in spec.planes.iter().enumerate().rev() {
        match p.rect {
            None => return i,
            Some([x0, y0, x1, y1]) => {
                let (px, py) = (x + p.disparity * ds, y + p.disparity * dt);
                if px >= x0 && px < x1 && py >= y0 && py < y1 {
                    return i;
                }
            }
        }
    }
    0
}

/// Renders the scene. Chroma samples sit at the center of their 2x2 luma
/// footprint.
pub fn render(spec: &SynthSceneSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let textures: Vec<Texture> = spec.planes.iter().map(|p| Texture::new(p.texture_seed)).collect();
    let (w, h) = (spec.width, spec.height);
    let (cw, chh) = chroma_dims(w, h);
    let (cs, ct) = ((spec.angular_rows / 2) as f64, (spec.angular_cols / 2) as f64);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);

    let sample = |ch: usize, x: f64, y: f64, ds: f64, dt: f64| {
        let i = visible(spec, x, y, ds, dt);
        let dp = spec.planes[i].disparity;
        textures[i].eval(ch, x + dp * ds, y + dp * dt)
    };

    let mut views = Vec::with_capacity(spec.angular_rows * spec.angular_cols);
    for s in 0..spec.angular_rows {
        for t in 0..spec.angular_cols {
            let (ds, dt) = (s as f64 - cs, t as f64 - ct);
            let mut y: Vec<f64> = (0..w * h).map(|i| sample(0, (i % w) as f64, (i / w) as f64, ds, dt)).collect();
            if spec.noise_sigma > 0.0 {
                y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
            }
            let chroma = |ch: usize| {
                let d: Vec<f64> = (0..cw * chh)
                    .map(|i| sample(ch, 2.0 * (i % cw) as f64 + 0.5, 2.0 * (i / cw) as f64 + 0.5, ds, dt))
                    .collect();
                Plane::from_f64(cw, chh, &d)
            };
            views.push(View::new(Plane::from_f64(w, h, &y), chroma(1), chroma(2))?);
        }
    }
    let labels = (0..w * h)
        .map(|i| visible(spec, (i % w) as f64, (i / w) as f64, 0.0, 0.0) as u8)
        .collect();
    Ok(SynthOutput {
        lf: LightField::with_default_mask(spec.angular_rows, spec.angular_cols, views)?,
        labels,
    })
}

/// Writes the light field directory plus `scene.json`, `labels.pgm`
/// (visible plane index per center-view pixel) and `disparity.txt` (the
/// true center-view disparity, one text row per pixel row).
pub fn write_scene(spec: &SynthSceneSpec, out: &SynthOutput, dir: &Path) -> Result<()> {
    save_lf_dir(&out.lf, dir)?;
    let json = serde_json::to_string_pretty(spec).map_err(|e| Error::format(e.to_string()))?;
    std::fs::write(dir.join("scene.json"), json)?;
    let mut text = String::new();
    for row in out.disparity(spec).chunks(spec.width) {
        let cells: Vec<String> = row.iter().map(|d| format!("{d}")).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    std::fs::write(dir.join("disparity.txt"), text)?;
    let maxval = (spec.planes.len() - 1).max(1) as u16;
    let labels: Vec<u16> = out.labels.iter().map(|&l| u16::from(l)).collect();
    crate::disparity::write_pgm(&dir.join("labels.pgm"), spec.width, spec.height, maxval, &labels)
}

/// Luma of `count` single-view textures of `size x size` pixels, seeds
/// `first_seed..`. Handy as a dictionary training corpus; keep the seeds
/// disjoint from any scene evaluated with the trained dictionary.
pub fn texture_corpus(count: usize, size: usize, first_seed: u64) -> Result<Vec<Plane>> {
    (0..count as u64)
        .map(|i| {
            let spec = SynthSceneSpec::single_plane(size, size, 1, 0.0, first_seed + i);
            Ok(render(&spec)?.lf.plane(0, 0, Channel::Y).clone())
        })
        .collect()
}

/// The scenes used for rate-distortion comparisons: 15x15 views of 64x64
/// pixels, single and layered planes spread across the disparity range.
pub fn standard_suite() -> Vec<(&'static str, SynthSceneSpec)> {
    let mut three = SynthSceneSpec::two_plane(64, 64, 15, -0.9, 1.2, 31);
    three.planes.push(SynthPlane { texture_seed: 33, disparity: 2.1, rect: Some([8.0, 40.0, 28.0, 60.0]) });
    vec![
        ("plane_0.9", SynthSceneSpec::single_plane(64, 64, 15, 0.9, 11)),
        ("two_plane", SynthSceneSpec::two_plane(64, 64, 15, 0.0, 2.1, 21)),
        ("three_plane", three),
    ]
}

/// Peak location of the circular cross-correlation of two equal-size
/// planes, as the shift `(dx, dy)` that best maps `b` onto `a`. Used by
/// tests as an independent check of rendered parallax.
pub fn correlation_peak(a: &Plane, b: &Plane, max_shift: i64) -> (i64, i64) {
    let (w, h) = (a.width as i64, a.height as i64);
    let mean = |p: &Plane| p.data.iter().map(|&v| f64::from(v)).sum::<f64>() / p.data.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for dy in -max_shift..=max_shift {
        for dx in -max_shift..=max_shift {
            let mut acc = 0.0;
            for y in max_shift..h - max_shift {
                for x in max_shift..w - max_shift {
                    let va = f64::from(a.get(x as usize, y as usize)) - ma;
                    let vb = f64::from(b.get((x + dx) as usize, (y + dy) as usize)) - mb;
                    acc += va * vb;
                }
            }
            if acc > best_v {
                best_v = acc;
                best = (dx, dy);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lf::Channel;

    #[test]
    fn zero_disparity_views_are_identical() {
        let out = render(&SynthSceneSpec::single_plane(20, 16, 5, 0.0, 1)).unwrap();
        let c = out.lf.view(2, 2);
        assert!(out.lf.views().iter().all(|v| v == c));
        assert!(out.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn parallax_follows_the_convention() {
        // dp = 2 makes view (0, 0) of a 5x5 grid the center shifted by (-4, -4).
        let out = render(&SynthSceneSpec::single_plane(48, 48, 5, 2.0, 7)).unwrap();
        let c = out.lf.plane(2, 2, Channel::Y);
        let v = out.lf.plane(0, 0, Channel::Y);
        for y in 4..48 {
            for x in 4..48 {
                assert_eq!(v.get(x, y), c.get(x - 4, y - 4));
            }
        }
        assert_eq!(correlation_peak(v, c, 6), (-4, -4));
    }

    #[test]
    fn label_map_matches_rectangle() {
        let spec = SynthSceneSpec::two_plane(32, 24, 3, 0.0, 1.5, 4);
        let out = render(&spec).unwrap();
        for y in 0..24 {
            for x in 0..32 {
                let inside = (8..24).contains(&x) && (6..18).contains(&y);
                assert_eq!(out.labels[y * 32 + x], u8::from(inside), "({x},{y})");
            }
        }
        let d = out.disparity(&spec);
        assert_eq!(d[12 * 32 + 16], 1.5);
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = standard_suite().remove(2).1;
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SynthSceneSpec>(&text).unwrap(), spec);
    }

    #[test]
    fn render_is_deterministic_with_noise() {
        let mut spec = SynthSceneSpec::single_plane(16, 16, 3, 0.3, 9);
        spec.noise_sigma = 2.0;
        spec.noise_seed = 5;
        assert_eq!(render(&spec).unwrap().lf, render(&spec).unwrap().lf);
    }
}
