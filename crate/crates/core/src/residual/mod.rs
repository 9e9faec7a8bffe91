//! Deterministic intra-only residual codec: 8x8 integer DCT planes, view
//! sequences and lossless disparity maps.

pub mod bits;
pub mod dct;
pub mod dmap;
pub mod plane;
pub mod sequence;

pub use dct::{dct8_forward, dct8_inverse, fdct_int, idct_int};
pub use dmap::{decode_disparity_map, encode_disparity_map};
pub use plane::{decode_plane, encode_plane, step_size, CodedPlane, QuantConfig, Q_MAX, Q_MIN};
pub use sequence::{decode_sequence, encode_sequence};
