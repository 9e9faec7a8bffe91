//! Light field compression by disparity-guided sparse coding over a
//! perspective-shifted dictionary anchored on structural key views.
//!
//! Pipeline: estimate a per-patch disparity map from the luma views, code
//! five key views directly, approximate every view of each 8x8 coding region
//! by sparse coding over the disparity segment selected for each patch (the
//! decoder repeats the same pursuit on the decoded key views, so no
//! coefficients are sent), and code the approximation residuals.

pub mod bitstream;
pub mod codec;
pub mod coder;
pub mod dictionary;
pub mod disparity;
pub mod error;
pub mod eval;
pub mod lf;
pub mod omp;
pub mod par;
pub mod residual;
pub mod synth;

pub use error::{Error, Result};
