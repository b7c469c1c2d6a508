//! Shadow-free images by pixel-wise orthogonal decomposition in log-RGB.
//!
//! Each pixel's log vector `u = ln(v + 14)` splits into a component along
//! the model's free direction `u0`, which absorbs illumination changes, and
//! an orthogonal component `u_p` that does not change under shadow.
//! [`pipeline::shadow_free`] turns `u_p` back into a colored image.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colorspace;
pub mod error;
pub mod image;
pub mod invariant;
pub mod io;
pub mod linalg;
pub mod params;
pub mod pipeline;
pub mod restore;
pub mod simeval;

pub use error::{Error, Result};
pub use image::{GrayImage, LogImage, Mask, RgbImage, ScalarImage};
pub use params::{preset, ModelParams};
pub use pipeline::{shadow_free, PipelineConfig, Settings};
