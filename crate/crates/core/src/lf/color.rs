//! Full-range BT.601 color conversion and 4:2:0 subsampling.

use super::{chroma_dims, clamp_u8, Plane};

pub fn rgb_to_yuv(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    [
        clamp_u8(0.299 * r + 0.587 * g + 0.114 * b),
        clamp_u8(-0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0),
        clamp_u8(0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0),
    ]
}

pub fn yuv_to_rgb(y: u8, u: u8, v: u8) -> [u8; 3] {
    let (y, u, v) = (f64::from(y), f64::from(u) - 128.0, f64::from(v) - 128.0);
    [
        clamp_u8(y + 1.402 * v),
        clamp_u8(y - 0.344_136 * u - 0.714_136 * v),
        clamp_u8(y + 1.772 * u),
    ]
}

/// Averages 2x2 blocks of a full-resolution plane (edge blocks average the
/// samples that exist).
pub fn subsample_420(full: &Plane) -> Plane {
    let (cw, ch) = chroma_dims(full.width, full.height);
    let mut out = Vec::with_capacity(cw * ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let mut sum = 0u32;
            let mut n = 0u32;
            for y in (2 * cy)..(2 * cy + 2).min(full.height) {
                for x in (2 * cx)..(2 * cx + 2).min(full.width) {
                    sum += u32::from(full.get(x, y));
                    n += 1;
                }
            }
            out.push(((sum + n / 2) / n) as u8);
        }
    }
    Plane {
        width: cw,
        height: ch,
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_round_trip_within_one_level() {
        // Every 4th level on each axis keeps this fast; the bound holds for
        // the full cube as well.
        let mut worst = 0i32;
        for r in (0..=255u8).step_by(3) {
            for g in (0..=255u8).step_by(5) {
                for b in (0..=255u8).step_by(7) {
                    let [y, u, v] = rgb_to_yuv(r, g, b);
                    let back = yuv_to_rgb(y, u, v);
                    for (a, o) in back.iter().zip([r, g, b]) {
                        worst = worst.max((i32::from(*a) - i32::from(o)).abs());
                    }
                }
            }
        }
        assert!(worst <= 1, "worst error {worst}");
    }

    #[test]
    fn gray_maps_to_neutral_chroma() {
        assert_eq!(rgb_to_yuv(77, 77, 77), [77, 128, 128]);
    }

    #[test]
    fn subsample_odd_dims() {
        let p = Plane::new(3, 1, vec![10, 20, 31]).unwrap();
        let s = subsample_420(&p);
        assert_eq!((s.width, s.height), (2, 1));
        assert_eq!(s.data, vec![15, 31]);
    }
}
