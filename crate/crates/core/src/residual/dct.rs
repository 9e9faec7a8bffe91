//! 8x8 DCT-II / DCT-III: a real orthonormal pair and the integer pair used
//! by the normative coding path.

pub const N: usize = 8;

/// `round(4096 * c_k * cos((2n + 1) k pi / 16))`, `c_0 = sqrt(1/8)`,
/// `c_k = sqrt(2/8)`. Hard-coded so decoding never depends on libm.
pub const COS_Q12: [[i64; 8]; 8] = [
    [1448, 1448, 1448, 1448, 1448, 1448, 1448, 1448],
    [2009, 1703, 1138, 400, -400, -1138, -1703, -2009],
    [1892, 784, -784, -1892, -1892, -784, 784, 1892],
    [1703, -400, -2009, -1138, 1138, 2009, 400, -1703],
    [1448, -1448, -1448, 1448, 1448, -1448, -1448, 1448],
    [1138, -2009, 400, 1703, -1703, -400, 2009, -1138],
    [784, -1892, 1892, -784, -784, 1892, -1892, 784],
    [400, -1138, 1703, -2009, 2009, -1703, 1138, -400],
];

/// Integer coefficients carry this many extra bits over the orthonormal
/// transform (they are 8x the real coefficients).
pub const COEFF_SHIFT: u32 = 3;

fn basis(k: usize, n: usize) -> f64 {
    let c = if k == 0 { (1.0 / 8.0f64).sqrt() } else { (2.0 / 8.0f64).sqrt() };
    c * ((2 * n + 1) as f64 * k as f64 * std::f64::consts::PI / 16.0).cos()
}

/// Orthonormal 2D DCT-II; `block` and the result are row-major, coefficient
/// `(u, v)` at index `v * 8 + u`.
pub fn dct8_forward(block: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..N {
        for u in 0..N {
            tmp[y * N + u] = (0..N).map(|x| basis(u, x) * block[y * N + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..N {
        for u in 0..N {
            out[v * N + u] = (0..N).map(|y| basis(v, y) * tmp[y * N + u]).sum();
        }
    }
    out
}

/// Orthonormal 2D DCT-III, the inverse of [`dct8_forward`].
pub fn dct8_inverse(coeffs: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..N {
        for u in 0..N {
            tmp[y * N + u] = (0..N).map(|v| basis(v, y) * coeffs[v * N + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..N {
        for x in 0..N {
            out[y * N + x] = (0..N).map(|u| basis(u, x) * tmp[y * N + u]).sum();
        }
    }
    out
}

#[inline]
fn round_shift(v: i64, s: u32) -> i64 {
    (v + (1 << (s - 1))) >> s
}

/// Integer forward transform. Output is `8 x` the orthonormal coefficients,
/// rounded.
pub fn fdct_int(block: &[i32; 64]) -> [i32; 64] {
    let mut tmp = [0i64; 64];
    for y in 0..N {
        for u in 0..N {
            let s: i64 = (0..N).map(|x| COS_Q12[u][x] * i64::from(block[y * N + x])).sum();
            tmp[y * N + u] = round_shift(s, 12 - COEFF_SHIFT);
        }
    }
    let mut out = [0i32; 64];
    for v in 0..N {
        for u in 0..N {
            let s: i64 = (0..N).map(|y| COS_Q12[v][y] * tmp[y * N + u]).sum();
            out[v * N + u] = round_shift(s, 12) as i32;
        }
    }
    out
}

/// Integer inverse of [`fdct_int`].
pub fn idct_int(coeffs: &[i32; 64]) -> [i32; 64] {
    let mut tmp = [0i64; 64];
    for y in 0..N {
        for u in 0..N {
            let s: i64 = (0..N).map(|v| COS_Q12[v][y] * i64::from(coeffs[v * N + u])).sum();
            tmp[y * N + u] = round_shift(s, 12);
        }
    }
    let mut out = [0i32; 64];
    for y in 0..N {
        for x in 0..N {
            let s: i64 = (0..N).map(|u| COS_Q12[u][x] * tmp[y * N + u]).sum();
            out[y * N + x] = round_shift(s, 12 + COEFF_SHIFT) as i32;
        }
    }
    out
}

/// Zigzag scan: position `i` in the scan reads coefficient `ZIGZAG[i]`.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27,
    20, 13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58,
    59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];
