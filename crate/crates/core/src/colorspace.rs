//! Back from log space, sRGB ↔ CIELAB, and luminance/chrominance recombination.
//!
//! Lab uses the sRGB primaries with the D65 white and the 2° observer. The
//! reference white is taken as the image of RGB white under the primaries
//! matrix so that (255, 255, 255) lands exactly on the neutral axis.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::Result;
use crate::image::{ensure_same_size, LogImage, RgbImage};
use crate::invariant::LOG_OFFSET;
use crate::linalg::{dot, Vec3};

/// `v = exp(u) − 14`, rounded and clamped to `[0, 255]`.
pub fn from_log(u: &LogImage) -> RgbImage {
    let data = u
        .pixels()
        .par_iter()
        .map(|p| p.map(|c| (c.exp() - LOG_OFFSET).round().clamp(0.0, 255.0) as u8))
        .collect();
    RgbImage::new(u.width(), u.height(), data).expect("same shape")
}

const SRGB_TO_XYZ: [Vec3; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

struct Tables {
    linear: [f64; 256],
    xyz_to_srgb: [Vec3; 3],
    white: Vec3,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| Tables {
        linear: std::array::from_fn(|v| srgb_decode(v as f64 / 255.0)),
        xyz_to_srgb: invert3(&SRGB_TO_XYZ),
        white: SRGB_TO_XYZ.map(|row| dot(row, [1.0; 3])),
    })
}

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn invert3(m: &[Vec3; 3]) -> [Vec3; 3] {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / det))
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let f3 = f * f * f;
    if f3 > LAB_EPSILON {
        f3
    } else {
        (116.0 * f - 16.0) / LAB_KAPPA
    }
}

/// `(L, a, b)` of an 8-bit sRGB triple.
pub fn srgb_to_lab(p: [u8; 3]) -> Vec3 {
    let t = tables();
    let lin = p.map(|c| t.linear[c as usize]);
    let xyz = SRGB_TO_XYZ.map(|row| dot(row, lin));
    let [fx, fy, fz] = [0, 1, 2].map(|i| lab_f(xyz[i] / t.white[i]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Nearest 8-bit sRGB triple for a Lab color; out-of-gamut channels clamp.
pub fn lab_to_srgb(lab: Vec3) -> [u8; 3] {
    let t = tables();
    let [l, a, b] = lab;
    let fy = (l + 16.0) / 116.0;
    let fx = fy + a / 500.0;
    let fz = fy - b / 200.0;
    let yr = if l > LAB_KAPPA * LAB_EPSILON {
        fy * fy * fy
    } else {
        l / LAB_KAPPA
    };
    let xyz = [lab_f_inv(fx) * t.white[0], yr * t.white[1], lab_f_inv(fz) * t.white[2]];
    t.xyz_to_srgb.map(|row| {
        let lin = dot(row, xyz).clamp(0.0, 1.0);
        (srgb_encode(lin) * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    data: Vec<Vec3>,
}

impl LabImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Vec3] {
        &self.data
    }
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    LabImage {
        width: img.width(),
        height: img.height(),
        data: img.pixels().par_iter().map(|&p| srgb_to_lab(p)).collect(),
    }
}

pub fn lab_to_rgb(lab: &LabImage) -> RgbImage {
    let data = lab.data.par_iter().map(|&p| lab_to_srgb(p)).collect();
    RgbImage::new(lab.width, lab.height, data).expect("same shape")
}

/// Lightness from `luminance`, chrominance `(a, b)` from `chrominance`.
pub fn recombine(luminance: &RgbImage, chrominance: &RgbImage) -> Result<RgbImage> {
    ensure_same_size(luminance, chrominance, "Lab recombination")?;
    let data = luminance
        .pixels()
        .par_iter()
        .zip(chrominance.pixels().par_iter())
        .map(|(&lum, &chr)| {
            let l = srgb_to_lab(lum)[0];
            let [_, a, b] = srgb_to_lab(chr);
            lab_to_srgb([l, a, b])
        })
        .collect();
    RgbImage::new(luminance.width(), luminance.height(), data)
}
