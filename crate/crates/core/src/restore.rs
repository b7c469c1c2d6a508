//! Color restoration for pixels near the neutral axis.
//!
//! Pixels whose log vector points almost along `u0` lose nearly all of their
//! color in the projection. The mean deviation `T` of those pixels' unit
//! directions from `u0` is added back to every invariant vector, scaled by a
//! falloff that fades with the pixel's own distance from the neutral axis.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ensure_same_size, LogImage, Mask};
use crate::linalg::{add, norm, scale, sub, CompensatedSum, Vec3};

pub const DEFAULT_EPSILON: f64 = 0.15;
pub const DEFAULT_KAPPA: f64 = 0.02;

/// Pixels near the neutral axis and their mean deviation from it.
#[derive(Clone, Debug, PartialEq)]
pub struct NeutralSet {
    pub mask: Mask,
    pub count: usize,
    pub t: Vec3,
}

/// `‖u/‖u‖ − u0‖`
#[inline]
pub fn neutral_distance(u: Vec3, u0: Vec3) -> f64 {
    norm(sub(scale(u, 1.0 / norm(u)), u0))
}

/// `1 / (κ·d³ + 1)`
#[inline]
pub fn falloff(d: f64, kappa: f64) -> f64 {
    1.0 / (kappa * d * d * d + 1.0)
}

/// Membership `‖u/‖u‖ − u0‖ ≤ ε` and `T = mean(u0 − u/‖u‖)` over members.
///
/// `T` is accumulated in row-major order with compensated summation, so it
/// does not depend on the thread count.
pub fn neutral_set(u: &LogImage, u0: Vec3, epsilon: f64) -> Result<NeutralSet> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let members: Vec<bool> = u
        .pixels()
        .par_iter()
        .map(|&p| neutral_distance(p, u0) <= epsilon)
        .collect();

    let mut acc = CompensatedSum::default();
    let mut count = 0usize;
    for (&p, _) in u.pixels().iter().zip(&members).filter(|(_, &m)| m) {
        acc.add(sub(u0, scale(p, 1.0 / norm(p))));
        count += 1;
    }
    let t = if count == 0 {
        [0.0; 3]
    } else {
        scale(acc.total(), 1.0 / count as f64)
    };
    Ok(NeutralSet {
        mask: Mask::new(u.width(), u.height(), members)?,
        count,
        t,
    })
}

/// `u_c = ‖u_p‖ · (u_p/‖u_p‖ + falloff(d)·T)` with `d = ‖u/‖u‖ − u0‖`,
/// evaluated as `u_p + ‖u_p‖·falloff(d)·T`.
///
/// The rewritten form has no division: it is the identity on `u_p` when
/// `T = 0` and yields 0 where `u_p = 0`.
pub fn correct(up: &LogImage, u: &LogImage, u0: Vec3, ns: &NeutralSet, kappa: f64) -> Result<LogImage> {
    ensure_same_size(up, u, "color correction")?;
    ensure_same_size(up, &ns.mask, "color correction")?;
    if !(kappa >= 0.0) {
        return Err(Error::Argument(format!("kappa must be nonnegative, got {kappa}")));
    }
    let t = ns.t;
    let data = up
        .pixels()
        .par_iter()
        .zip(u.pixels().par_iter())
        .map(|(&p, &raw)| {
            let f = falloff(neutral_distance(raw, u0), kappa);
            add(p, scale(t, norm(p) * f))
        })
        .collect();
    LogImage::new(up.width(), up.height(), data)
}
