//! Synthetic shadows and the invariance evaluation harness.
//!
//! Shadows follow the linear log model: inside the umbra every channel is
//! multiplied, after the +14 offset, by `K_H^(-1/2.4)`. An optional penumbra
//! band outside the mask ramps that exponent linearly down to zero.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ensure_same_size, LogImage, Mask, RgbImage};
use crate::invariant::LOG_OFFSET;
use crate::linalg::Vec3;
use crate::params::ModelParams;
use crate::pipeline::{run_stages, Settings};

/// Divisor of `ln K_H` in the log-domain shadow shift.
pub const SHADOW_EXPONENT_DIVISOR: f64 = 2.4;

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowSpec {
    pub mask: Mask,
    /// Width, in pixels, of the soft band outside the mask.
    pub penumbra_width: usize,
    pub k: [f64; 3],
}

impl ShadowSpec {
    pub fn umbra(mask: Mask, k: [f64; 3]) -> Self {
        Self {
            mask,
            penumbra_width: 0,
            k,
        }
    }

    fn validate(&self) -> Result<()> {
        for &kv in &self.k {
            if !(kv > 1.0) || !kv.is_finite() {
                return Err(Error::Domain(format!(
                    "shadow ratio K must exceed 1 (K ≤ 1 would brighten), got {kv}"
                )));
            }
        }
        Ok(())
    }

    /// Per-pixel shadow strength in `[0, 1]`: 1 inside the mask,
    /// `1 − d/(w+1)` at Euclidean distance `d ≤ w` from it, 0 beyond.
    pub fn strength(&self) -> Vec<f64> {
        let (w, h) = (self.mask.width(), self.mask.height());
        let band = self.penumbra_width;
        let cells = self.mask.cells();
        (0..w * h)
            .into_par_iter()
            .map(|i| {
                if cells[i] {
                    return 1.0;
                }
                if band == 0 {
                    return 0.0;
                }
                let (x, y) = ((i % w) as isize, (i / w) as isize);
                let r = band as isize;
                let mut best = f64::INFINITY;
                for yy in (y - r).max(0)..=(y + r).min(h as isize - 1) {
                    for xx in (x - r).max(0)..=(x + r).min(w as isize - 1) {
                        if cells[yy as usize * w + xx as usize] {
                            let d = (((xx - x).pow(2) + (yy - y).pow(2)) as f64).sqrt();
                            best = best.min(d);
                        }
                    }
                }
                (1.0 - best / (band as f64 + 1.0)).max(0.0)
            })
            .collect()
    }

    /// Log-domain shift `−ln(K_H)/2.4` at full strength.
    pub fn full_shift(&self) -> Vec3 {
        self.k.map(|kv| -kv.ln() / SHADOW_EXPONENT_DIVISOR)
    }
}

/// Applies the shadow and re-quantizes to 8 bits.
pub fn synthesize_shadow(image: &RgbImage, spec: &ShadowSpec) -> Result<RgbImage> {
    spec.validate()?;
    ensure_same_size(image, &spec.mask, "shadow synthesis")?;
    let shift = spec.full_shift();
    let strength = spec.strength();
    let data = image
        .pixels()
        .par_iter()
        .zip(strength.par_iter())
        .map(|(&p, &s)| {
            if s == 0.0 {
                return p;
            }
            std::array::from_fn(|c| {
                let v = (p[c] as f64 + LOG_OFFSET) * (s * shift[c]).exp() - LOG_OFFSET;
                v.clamp(0.0, 255.0).round() as u8
            })
        })
        .collect();
    RgbImage::new(image.width(), image.height(), data)
}

/// Float-precision shadow on a log raster: adds the (ramped) shift with no
/// clamping or quantization.
pub fn synthesize_shadow_log(u: &LogImage, spec: &ShadowSpec) -> Result<LogImage> {
    spec.validate()?;
    ensure_same_size(u, &spec.mask, "shadow synthesis")?;
    let shift = spec.full_shift();
    let strength = spec.strength();
    let data = u
        .pixels()
        .par_iter()
        .zip(strength.par_iter())
        .map(|(&p, &s)| std::array::from_fn(|c| p[c] + s * shift[c]))
        .collect();
    LogImage::new(u.width(), u.height(), data)
}

/// Root mean square difference over all pixels and channels.
pub fn rmse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    ensure_same_size(a, b, "rmse")?;
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| p.iter().zip(q).map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64))
        .sum();
    Ok((sum as f64 / (a.pixels().len() * 3) as f64).sqrt())
}

/// `max − min` of all channel values across both images.
pub fn value_range(a: &RgbImage, b: &RgbImage) -> u8 {
    let (lo, hi) = a
        .pixels()
        .iter()
        .chain(b.pixels())
        .flatten()
        .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi.saturating_sub(lo)
}

/// RMSE divided by the value range of the two images. Two identical constant
/// images have range 0 and relative error 0.
pub fn relative_error(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let e = rmse(a, b)?;
    let range = value_range(a, b);
    Ok(if range == 0 { 0.0 } else { e / range as f64 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub label: String,
    pub rmse: f64,
    pub relative_error: f64,
    pub range_basis: f64,
}

/// Which images a report row compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Original,
    Invariant,
    ShadowFree,
}

impl RowKind {
    pub const ALL: [RowKind; 3] = [RowKind::Original, RowKind::Invariant, RowKind::ShadowFree];

    pub fn name(self) -> &'static str {
        match self {
            RowKind::Original => "original",
            RowKind::Invariant => "invariant",
            RowKind::ShadowFree => "shadow_free",
        }
    }
}

/// RMSE and relative error per image kind and shadow variant. Rows are
/// labelled `<kind>/<variant>` and ordered by kind, then variant.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub variants: Vec<String>,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, kind: RowKind, variant: usize) -> &EvalRow {
        &self.rows[kind as usize * self.variants.len() + variant]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,rmse,relative_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.6},{:.6}", r.label, r.rmse, r.relative_error);
        }
        out
    }

    /// Plain-text table: one line per image kind, RMSE columns then
    /// relative-error (%) columns, one per variant.
    pub fn to_table(&self) -> String {
        let n = self.variants.len();
        let mut out = String::new();
        let _ = write!(out, "{:<12}", "");
        for v in &self.variants {
            let _ = write!(out, " | {:>12}", format!("rmse {v}"));
        }
        for v in &self.variants {
            let _ = write!(out, " | {:>12}", format!("rel% {v}"));
        }
        out.push('\n');
        out.push_str(&"-".repeat(12 + 15 * 2 * n));
        out.push('\n');
        for kind in RowKind::ALL {
            let _ = write!(out, "{:<12}", kind.name());
            for i in 0..n {
                let _ = write!(out, " | {:>12.2}", self.row(kind, i).rmse);
            }
            for i in 0..n {
                let _ = write!(out, " | {:>12.2}", 100.0 * self.row(kind, i).relative_error);
            }
            out.push('\n');
        }
        out
    }
}

/// Parameters used to process each variant in [`invariance_report`].
#[derive(Clone, Debug)]
pub enum ReportParams {
    /// The same model for the base image and every variant.
    Fixed(ModelParams),
    /// A model derived from each variant's own `K`.
    FromShadow,
}

/// Processes the base image and each shadowed variant, then compares
/// originals, invariant images and shadow-free images against the base.
pub fn invariance_report(
    base: &RgbImage,
    specs: &[ShadowSpec],
    params: &ReportParams,
    settings: &Settings,
) -> Result<EvalReport> {
    if specs.is_empty() {
        return Err(Error::Argument("at least one shadow variant is required".into()));
    }
    let per_variant: Vec<[EvalRow; 3]> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<[EvalRow; 3]> {
            let p = match params {
                ReportParams::Fixed(p) => p.clone(),
                ReportParams::FromShadow => ModelParams::from_k(spec.k, format!("v{}", i + 1))?,
            };
            let variant = synthesize_shadow(base, spec)?;
            let a = run_stages(base, &p, settings)?;
            let b = run_stages(&variant, &p, settings)?;
            let label = format!("v{}", i + 1);
            let pairs = [
                (RowKind::Original, base, &variant),
                (RowKind::Invariant, &a.invariant_rgb, &b.invariant_rgb),
                (RowKind::ShadowFree, &a.shadow_free, &b.shadow_free),
            ];
            let mut rows = pairs.map(|(kind, x, y)| EvalRow {
                label: format!("{}/{label}", kind.name()),
                rmse: 0.0,
                relative_error: 0.0,
                range_basis: value_range(x, y) as f64,
            });
            for (row, (_, x, y)) in rows.iter_mut().zip(pairs) {
                row.rmse = rmse(x, y)?;
                row.relative_error = relative_error(x, y)?;
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(3 * specs.len());
    for kind in RowKind::ALL {
        rows.extend(per_variant.iter().map(|r| r[kind as usize].clone()));
    }
    Ok(EvalReport {
        variants: (1..=specs.len()).map(|i| format!("v{i}")).collect(),
        rows,
    })
}
