//! Illumination model parameters.
//!
//! A sunlit surface and the same surface in shadow differ, per channel, by a
//! constant factor `K_H` between daylight and skylight. The three log-ratios
//! `β₁ β₂ β₃` built from those factors define the invariant system; `K_H`
//! itself is fitted from measured spectra or replaced by a built-in preset
//! for a given sun elevation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::invariant::free_solution;
use crate::linalg::{mat_vec, system_matrix, Vec3};

/// First wavelength of the resampling grid, in nm.
pub const GRID_START_NM: f64 = 400.0;
/// Last wavelength of the resampling grid, in nm.
pub const GRID_END_NM: f64 = 700.0;
pub const GRID_STEP_NM: f64 = 5.0;
/// Number of samples on the uniform 5 nm grid over `[400, 700]`.
pub const GRID_LEN: usize = 61;

/// Identity tolerance for betas derived from `K` in double precision.
pub const DERIVED_IDENTITY_TOL: f64 = 1e-9;
/// Identity tolerance for betas read from three-decimal tables.
pub const TABLE_IDENTITY_TOL: f64 = 5e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpdKind {
    Illuminant,
    MatchingR,
    MatchingG,
    MatchingB,
}

/// Spectral power distribution resampled onto the 5 nm grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spd {
    kind: SpdKind,
    values: Vec<f64>,
    source_samples: usize,
}

impl Spd {
    /// Builds a distribution from `(wavelength_nm, power)` samples and
    /// resamples it by linear interpolation.
    ///
    /// Samples must be strictly increasing, lie in `[400, 700]` and cover both
    /// ends of that interval.
    pub fn from_samples(samples: &[(f64, f64)], kind: SpdKind) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 spectral samples, got {}",
                samples.len()
            )));
        }
        for (i, &(w, p)) in samples.iter().enumerate() {
            if !w.is_finite() || !(GRID_START_NM..=GRID_END_NM).contains(&w) {
                return Err(Error::Domain(format!(
                    "wavelength {w} nm outside [{GRID_START_NM}, {GRID_END_NM}]"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Domain(format!(
                    "power at {w} nm must be finite and nonnegative, got {p}"
                )));
            }
            if i > 0 && w <= samples[i - 1].0 {
                return Err(Error::Domain(format!(
                    "wavelengths must be strictly increasing ({} then {w})",
                    samples[i - 1].0
                )));
            }
        }
        let first = samples[0].0;
        let last = samples[samples.len() - 1].0;
        if first > GRID_START_NM || last < GRID_END_NM {
            return Err(Error::Domain(format!(
                "samples span [{first}, {last}] nm but must cover [{GRID_START_NM}, {GRID_END_NM}]"
            )));
        }

        let mut values = Vec::with_capacity(GRID_LEN);
        let mut seg = 0;
        for w in grid_wavelengths() {
            while samples[seg + 1].0 < w {
                seg += 1;
            }
            let (w0, p0) = samples[seg];
            let (w1, p1) = samples[seg + 1];
            let t = (w - w0) / (w1 - w0);
            values.push(if t == 0.0 { p0 } else { p0 + t * (p1 - p0) });
        }
        Ok(Self {
            kind,
            values,
            source_samples: samples.len(),
        })
    }

    /// Constructs a distribution directly from the 61 grid values.
    pub fn from_grid(values: Vec<f64>, kind: SpdKind) -> Result<Self> {
        if values.len() != GRID_LEN {
            return Err(Error::Argument(format!(
                "expected {GRID_LEN} grid values, got {}",
                values.len()
            )));
        }
        let samples: Vec<_> = grid_wavelengths().zip(values).collect();
        Self::from_samples(&samples, kind)
    }

    pub fn kind(&self) -> SpdKind {
        self.kind
    }

    /// Power at each grid wavelength, 400 nm first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of samples in the source data before resampling.
    pub fn source_samples(&self) -> usize {
        self.source_samples
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Serializes the grid in the same `wavelength_nm,power` text format that
    /// [`parse_spd`] reads.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, p) in grid_wavelengths().zip(&self.values) {
            let _ = writeln!(out, "{w},{p}");
        }
        out
    }
}

/// The 61 wavelengths 400, 405, ..., 700 nm.
pub fn grid_wavelengths() -> impl Iterator<Item = f64> + Clone {
    (0..GRID_LEN).map(|i| GRID_START_NM + GRID_STEP_NM * i as f64)
}

/// Parses `wavelength_nm,power` lines; blank lines and lines starting with
/// `#` are skipped.
pub fn parse_spd(text: &str, kind: SpdKind) -> Result<Spd> {
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let mut fields = line.split(',');
        let (Some(w), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!(
                "expected `wavelength_nm,power`, got {line:?}"
            )));
        };
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad wavelength {:?}", w.trim())))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad power {:?}", p.trim())))?;
        samples.push((w, p));
    }
    Spd::from_samples(&samples, kind)
}

pub fn load_spd(path: impl AsRef<Path>, kind: SpdKind) -> Result<Spd> {
    let text = fs::read_to_string(path)?;
    parse_spd(&text, kind)
}

/// Arithmetic grid of candidate `K` values searched by [`estimate_k`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KSearch {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl Default for KSearch {
    fn default() -> Self {
        Self {
            lower: 1.01,
            upper: 10.0,
            step: 0.01,
        }
    }
}

impl KSearch {
    /// Number of grid points, or an error for an empty or invalid range.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> Result<usize> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Argument(format!(
                "K step must be positive, got {}",
                self.step
            )));
        }
        if !(self.lower > 0.0) {
            return Err(Error::Argument(format!(
                "K range lower bound must be positive, got {}",
                self.lower
            )));
        }
        if !(self.upper >= self.lower) || !self.upper.is_finite() {
            return Err(Error::Argument(format!(
                "empty K range [{}, {}]",
                self.lower, self.upper
            )));
        }
        // Small slack so that an upper bound on the grid is included.
        Ok(((self.upper - self.lower) / self.step + 1e-9).floor() as usize + 1)
    }

    pub fn value(&self, index: usize) -> f64 {
        self.lower + index as f64 * self.step
    }
}

/// Fits the per-channel daylight/skylight ratio by exhaustive search:
///
/// `K_H = argmin_K Σ_λ |Q_H(λ) · (E_day(λ) − K · E_sky(λ))|`
///
/// Ties resolve to the smaller `K`.
pub fn estimate_k(
    e_day: &Spd,
    e_sky: &Spd,
    matching: [&Spd; 3],
    search: KSearch,
) -> Result<[f64; 3]> {
    let n = search.len()?;
    for (name, spd) in [
        ("daylight", e_day),
        ("skylight", e_sky),
        ("red matching function", matching[0]),
        ("green matching function", matching[1]),
        ("blue matching function", matching[2]),
    ] {
        if spd.is_all_zero() {
            return Err(Error::Degenerate(format!("{name} SPD is all zero")));
        }
    }

    let mut k = [0.0; 3];
    for (ch, q) in matching.iter().enumerate() {
        let objective = |kv: f64| -> f64 {
            q.values()
                .iter()
                .zip(e_day.values())
                .zip(e_sky.values())
                .map(|((&qv, &d), &s)| (qv * (d - kv * s)).abs())
                .sum()
        };
        let mut best = (0, objective(search.value(0)));
        for i in 1..n {
            let v = objective(search.value(i));
            if v < best.1 {
                best = (i, v);
            }
        }
        k[ch] = search.value(best.0);
    }
    Ok(k)
}

/// `β₁ = (ln K_R + ln K_G) / ln K_B`, `β₂ = (ln K_R + ln K_B) / ln K_G`,
/// `β₃ = (ln K_G + ln K_B) / ln K_R`.
pub fn betas_from_k(k: [f64; 3]) -> Result<Vec3> {
    for (&kv, ch) in k.iter().zip(["R", "G", "B"]) {
        if !(kv > 0.0) || !kv.is_finite() {
            return Err(Error::Domain(format!("K_{ch} must be positive, got {kv}")));
        }
        if (kv - 1.0).abs() <= 1e-12 {
            return Err(Error::Singular(format!("K_{ch} = 1 gives ln K_{ch} = 0")));
        }
    }
    let [r, g, b] = k.map(f64::ln);
    Ok([(r + g) / b, (r + b) / g, (g + b) / r])
}

/// Result of checking `2 + β₁ + β₂ + β₃ − β₁β₂β₃ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityCheck {
    pub residual: f64,
    pub within_tol: bool,
}

pub fn identity_residual(beta: Vec3) -> f64 {
    (2.0 + beta[0] + beta[1] + beta[2] - beta[0] * beta[1] * beta[2]).abs()
}

pub fn validate_identity(beta: Vec3, tol: f64) -> IdentityCheck {
    let residual = identity_residual(beta);
    IdentityCheck {
        residual,
        within_tol: residual <= tol,
    }
}

/// The `β₃` that satisfies the rank-2 identity exactly for given `β₁, β₂`.
pub fn closing_beta3(beta1: f64, beta2: f64) -> Result<f64> {
    let denom = beta1 * beta2 - 1.0;
    if denom.abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "β₁β₂ = 1 (β₁ = {beta1}, β₂ = {beta2}) leaves β₃ undetermined"
        )));
    }
    Ok((2.0 + beta1 + beta2) / denom)
}

/// Illumination model for one sun angle or weather condition.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    k: Option<[f64; 3]>,
    beta: Vec3,
    u0: Vec3,
    label: String,
}

impl ModelParams {
    /// Derives betas and the free solution from per-channel ratios, each of
    /// which must exceed 1.
    pub fn from_k(k: [f64; 3], label: impl Into<String>) -> Result<Self> {
        if let Some(&bad) = k.iter().find(|&&v| !(v > 1.0)) {
            return Err(Error::Domain(format!(
                "daylight/skylight ratio must exceed 1, got {bad}"
            )));
        }
        let beta = betas_from_k(k)?;
        let check = validate_identity(beta, DERIVED_IDENTITY_TOL);
        if !check.within_tol {
            return Err(Error::Domain(format!(
                "betas from K violate the rank-2 identity (residual {:e})",
                check.residual
            )));
        }
        let u0 = free_solution(beta)?;
        Ok(Self {
            k: Some(k),
            beta,
            u0,
            label: label.into(),
        })
    }

    /// Accepts betas from a rounded external table. The identity residual
    /// must be within [`TABLE_IDENTITY_TOL`]; `β₃` is then replaced by the
    /// value closing the identity exactly so that `u0` spans the null space.
    pub fn from_rounded_betas(beta: Vec3, label: impl Into<String>) -> Result<Self> {
        let check = validate_identity(beta, TABLE_IDENTITY_TOL);
        if !check.within_tol {
            return Err(Error::Domain(format!(
                "betas {beta:?} violate the rank-2 identity (residual {:e} > {TABLE_IDENTITY_TOL})",
                check.residual
            )));
        }
        let beta = [beta[0], beta[1], closing_beta3(beta[0], beta[1])?];
        let u0 = free_solution(beta)?;
        if u0.iter().any(|&c| c <= 0.0) {
            return Err(Error::Domain(format!(
                "free solution {u0:?} has a nonpositive component"
            )));
        }
        Ok(Self {
            k: None,
            beta,
            u0,
            label: label.into(),
        })
    }

    /// The ratios this model was derived from, when known.
    pub fn k(&self) -> Option<[f64; 3]> {
        self.k
    }

    pub fn beta(&self) -> Vec3 {
        self.beta
    }

    /// Unit null vector of the invariant system.
    pub fn u0(&self) -> Vec3 {
        self.u0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn system_matrix(&self) -> [Vec3; 3] {
        system_matrix(self.beta)
    }

    /// Largest component of `|A · u0|`.
    pub fn null_residual(&self) -> f64 {
        mat_vec(&self.system_matrix(), self.u0)
            .iter()
            .fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Per-channel ratios consistent with this model, scaled so that their
    /// geometric mean is `mean_k`. `ln K` is parallel to `u0`, so any such
    /// family reproduces the same betas.
    pub fn implied_k(&self, mean_k: f64) -> Result<[f64; 3]> {
        if !(mean_k > 1.0) {
            return Err(Error::Domain(format!("mean K must exceed 1, got {mean_k}")));
        }
        let s = 3.0 * mean_k.ln() / (self.u0[0] + self.u0[1] + self.u0[2]);
        Ok(self.u0.map(|c| (s * c).exp()))
    }
}

/// Table of betas per sun elevation, three decimals, plus the mean over
/// 20°–70°.
pub const PRESET_TABLE: [(&str, Vec3); 8] = [
    ("20deg", [2.353, 1.963, 1.745]),
    ("30deg", [2.321, 1.963, 1.767]),
    ("40deg", [2.299, 1.977, 1.770]),
    ("50deg", [2.371, 1.982, 1.716]),
    ("60deg", [2.648, 1.925, 1.604]),
    ("70deg", [2.520, 1.996, 1.617]),
    ("80deg", [2.473, 1.985, 1.652]),
    ("mean", [2.557, 1.889, 1.682]),
];

fn canonical_label(label: &str) -> Option<&'static str> {
    let l = label.trim().to_ascii_lowercase();
    let l = l.trim_end_matches("deg").trim_end_matches('°');
    PRESET_TABLE
        .iter()
        .map(|(name, _)| *name)
        .find(|name| name.trim_end_matches("deg") == l)
}

/// Built-in parameters by label: `20deg` … `80deg` (also `20`, `20°`) or
/// `mean`.
pub fn preset(label: &str) -> Result<ModelParams> {
    let name = canonical_label(label).ok_or_else(|| {
        Error::Argument(format!(
            "unknown preset {label:?}; expected one of {}",
            preset_labels().join(", ")
        ))
    })?;
    let (_, beta) = PRESET_TABLE.iter().find(|(n, _)| *n == name).unwrap();
    ModelParams::from_rounded_betas(*beta, name)
}

pub fn preset_labels() -> Vec<&'static str> {
    PRESET_TABLE.iter().map(|(n, _)| *n).collect()
}

pub fn all_presets() -> Vec<ModelParams> {
    PRESET_TABLE
        .iter()
        .map(|(name, _)| preset(name).expect("built-in presets are valid"))
        .collect()
}

/// Preset table as comma-separated text (`label,beta1,beta2,beta3`), using
/// the table values as printed.
pub fn presets_to_text() -> String {
    let mut out = String::from("# label,beta1,beta2,beta3\n");
    for (name, b) in PRESET_TABLE {
        let _ = writeln!(out, "{name},{},{},{}", b[0], b[1], b[2]);
    }
    out
}
