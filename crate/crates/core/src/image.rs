//! Raster carriers shared by every stage.
//!
//! All rasters are row-major with `width * height` cells. Per-pixel stages
//! map over the flat storage with rayon; they never reduce across pixels, so
//! their output does not depend on how the work is split between threads.

use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// 8-bit, 3-channel image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, pixel: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![pixel; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Result<Self> {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.data[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<[u8; 3]> {
        self.data
    }

    pub fn same_size<T: Raster>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }
}

/// 8-bit single-channel image (normalized exports, masks).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }
}

/// Per-pixel 3-vectors of reals.
///
/// Produced by the log transform (every component then lies in
/// `[ln 14, ln 269]`) and reused for the signed invariant vectors `u_p` and
/// the color-corrected `u_c`, which carry no such bound.
#[derive(Clone, Debug, PartialEq)]
pub struct LogImage {
    width: usize,
    height: usize,
    data: Vec<Vec3>,
}

impl LogImage {
    pub fn new(width: usize, height: usize, data: Vec<Vec3>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Vec3] {
        &self.data
    }

    pub fn into_pixels(self) -> Vec<Vec3> {
        self.data
    }
}

/// One real per pixel (alpha field, un-normalized gray invariants).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Affinely maps `[min, max]` onto `[0, 255]`. A constant field maps to
    /// all zeros.
    pub fn normalized(&self) -> GrayImage {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        let data = self
            .data
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                }
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Boolean raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_shape(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        Self::new(width, height, data)
    }

    /// Nonzero gray values are `true`.
    pub fn from_gray(gray: &GrayImage) -> Self {
        Self {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// 255 for `true`, 0 for `false`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Anything with raster dimensions.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

macro_rules! impl_raster {
    ($($t:ty),*) => {
        $(impl Raster for $t {
            fn width(&self) -> usize {
                self.width
            }
            fn height(&self) -> usize {
                self.height
            }
        })*
    };
}

impl_raster!(RgbImage, GrayImage, LogImage, ScalarImage, Mask);

pub(crate) fn ensure_same_size<A: Raster, B: Raster>(a: &A, b: &B, what: &str) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Argument(format!(
            "{what}: dimension mismatch ({}x{} vs {}x{})",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn check_shape(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Argument(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::Argument(format!(
            "expected {} pixels for {width}x{height}, got {len}",
            width.saturating_mul(height)
        )));
    }
    Ok(())
}
