//! Log transform, gray invariants and the pixel-wise orthogonal decomposition.
//!
//! In log space `u_H = ln(v_H + 14)` a change of illumination moves a pixel
//! along the fixed direction `u0` (the unit null vector of the invariant
//! system). Splitting each pixel as `u = u_p + α·u0` with `u_p ⊥ u0` isolates
//! that movement in the scalar `α`; `u_p` is the same for every illumination
//! of the surface and is the unique solution of the system orthogonal to `u0`.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{LogImage, RgbImage, ScalarImage};
use crate::linalg::{add, dot, norm, scale, sub, system_matrix, Vec3};
use crate::params::ModelParams;

/// Offset added to 8-bit values before taking logarithms.
pub const LOG_OFFSET: f64 = 14.0;

/// Tolerance used by [`uniqueness_check`] when comparing particular solutions.
pub const UNIQUENESS_TOL: f64 = 1e-9;

fn log_table() -> &'static [f64; 256] {
    static TABLE: std::sync::OnceLock<[f64; 256]> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(|v| (v as f64 + LOG_OFFSET).ln()))
}

#[inline]
pub fn log_pixel(p: [u8; 3]) -> Vec3 {
    let t = log_table();
    [t[p[0] as usize], t[p[1] as usize], t[p[2] as usize]]
}

/// `u_H = ln(v_H + 14)` per pixel and channel.
pub fn to_log(image: &RgbImage) -> LogImage {
    let data = image.pixels().par_iter().map(|&p| log_pixel(p)).collect();
    LogImage::new(image.width(), image.height(), data).expect("same shape")
}

/// Selects one of the three gray invariants (one row of the system matrix).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GrayIndex {
    /// `u_R + u_G − β₁·u_B`
    One,
    /// `u_R − β₂·u_G + u_B`
    Two,
    /// `−β₃·u_R + u_G + u_B`
    Three,
}

impl GrayIndex {
    pub const ALL: [GrayIndex; 3] = [GrayIndex::One, GrayIndex::Two, GrayIndex::Three];

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(GrayIndex::One),
            2 => Ok(GrayIndex::Two),
            3 => Ok(GrayIndex::Three),
            _ => Err(Error::Argument(format!("gray invariant index must be 1, 2 or 3, got {n}"))),
        }
    }

    fn row(self) -> usize {
        self as usize
    }
}

pub fn gray_invariant(u: Vec3, beta: Vec3, index: GrayIndex) -> f64 {
    dot(system_matrix(beta)[index.row()], u)
}

/// Un-normalized gray invariant raster; use [`ScalarImage::normalized`] for
/// an 8-bit export.
pub fn gray_invariant_image(image: &RgbImage, params: &ModelParams, index: GrayIndex) -> ScalarImage {
    let row = system_matrix(params.beta())[index.row()];
    let data = image
        .pixels()
        .par_iter()
        .map(|&p| dot(row, log_pixel(p)))
        .collect();
    ScalarImage::new(image.width(), image.height(), data).expect("same shape")
}

/// Normalized free solution `u0′ / ‖u0′‖` with
/// `u0′ = (β₁β₂ − 1, 1 + β₁, 1 + β₂)`.
pub fn free_solution(beta: Vec3) -> Result<Vec3> {
    let raw = [beta[0] * beta[1] - 1.0, 1.0 + beta[0], 1.0 + beta[1]];
    let n = norm(raw);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate(format!(
            "free solution of betas {beta:?} has zero length"
        )));
    }
    Ok(scale(raw, 1.0 / n))
}

/// Splits `u` into `(u_p, α)` with `α = ⟨u, u0⟩` and `u_p = u − α·u0`.
/// `u0` must be a unit vector.
#[inline]
pub fn project(u: Vec3, u0: Vec3) -> (Vec3, f64) {
    let alpha = dot(u, u0);
    (sub(u, scale(u0, alpha)), alpha)
}

/// Invariant part and illumination coordinate of every pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub up: LogImage,
    pub alpha: ScalarImage,
}

impl Decomposition {
    /// `u_p + α·u0` per pixel.
    pub fn reconstruct(&self, u0: Vec3) -> LogImage {
        let data = self
            .up
            .pixels()
            .par_iter()
            .zip(self.alpha.values().par_iter())
            .map(|(&up, &a)| add(up, scale(u0, a)))
            .collect();
        LogImage::new(self.up.width(), self.up.height(), data).expect("same shape")
    }
}

pub fn decompose(image: &RgbImage, params: &ModelParams) -> Decomposition {
    decompose_log(&to_log(image), params.u0())
}

/// Decomposition of an already log-transformed raster (used by the
/// float-precision synthetic-shadow path).
pub fn decompose_log(u: &LogImage, u0: Vec3) -> Decomposition {
    let (up, alpha): (Vec<Vec3>, Vec<f64>) = u.pixels().par_iter().map(|&p| project(p, u0)).unzip();
    let (w, h) = (u.width(), u.height());
    Decomposition {
        up: LogImage::new(w, h, up).expect("same shape"),
        alpha: ScalarImage::new(w, h, alpha).expect("same shape"),
    }
}

/// Moves every invariant vector to the common illumination coordinate
/// `alpha_ref`: `u_p + alpha_ref·u0`. This is what gives the invariant
/// raster a visible 8-bit rendering; see [`crate::pipeline::Settings`].
pub fn relight(up: &LogImage, u0: Vec3, alpha_ref: f64) -> LogImage {
    let shift = scale(u0, alpha_ref);
    let data = up.pixels().par_iter().map(|&p| add(p, shift)).collect();
    LogImage::new(up.width(), up.height(), data).expect("same shape")
}

/// Whether all vectors agree component-wise within `tol`.
pub fn particular_solutions_agree(solutions: &[Vec3], tol: f64) -> bool {
    let Some(first) = solutions.first() else {
        return true;
    };
    solutions
        .iter()
        .all(|s| s.iter().zip(first).all(|(a, b)| (a - b).abs() <= tol))
}

/// Checks that every particular solution `u_s + a·u0` (for `trials` random
/// `a`) projects to the same orthogonal solution.
pub fn uniqueness_check<R: Rng + ?Sized>(u_s: Vec3, u0: Vec3, trials: usize, rng: &mut R) -> bool {
    let solutions: Vec<Vec3> = (0..trials.max(1))
        .map(|_| {
            let a: f64 = rng.gen_range(-10.0..10.0);
            project(add(u_s, scale(u0, a)), u0).0
        })
        .collect();
    particular_solutions_agree(&solutions, UNIQUENESS_TOL)
}
