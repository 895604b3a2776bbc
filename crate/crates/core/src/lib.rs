//! Probably-approximately-correct frame-count bounds for multi-frame
//! super-resolution from sub-pixel translated, decimated acquisitions, with
//! the Monte-Carlo machinery to check them.
//!
//! Conventions: the forward DFT is unnormalized and the inverse carries
//! `1/M^2`. Translating by `d` maps `Z[n]` to `Z[n - d]`, i.e. multiplies the
//! spectrum by `exp(-i q . d)` with `q = 2 pi k' / (rN)`. Displacement errors
//! are given in LR pixels (`epsilon`) and realized in HR pixels.

pub mod acquisition;
pub mod bounds;
pub mod dft;
pub mod error;
pub mod fusion;
pub mod grid;
pub mod manifest;
pub mod montecarlo;
pub mod plane;
pub mod render;
pub mod rng;
pub mod scene;
pub mod table;

pub use error::{Error, Result};
