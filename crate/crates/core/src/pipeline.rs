//! End-to-end shadow-free processing and parameter selection.
//!
//! Stages, in order:
//!
//! 1. log transform `u = ln(v + 14)`
//! 2. orthogonal decomposition `u = u_p + α·u0`
//! 3. neutral set `S` and mean deviation `T`
//! 4. color correction `u_p → u_c`
//! 5. back to 8-bit RGB (after relighting both to a common `α`)
//! 6. both images to Lab
//! 7. `L` from `u_c`, `(a, b)` from `u_p`
//! 8. back to RGB
//!
//! Everything up to step 5 runs in `f64`; 8-bit quantization happens only
//! where the stages pass through RGB.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::colorspace::{from_log, recombine};
use crate::error::{Error, Result};
use crate::image::{GrayImage, LogImage, Mask, RgbImage, ScalarImage};
use crate::invariant::{decompose, gray_invariant_image, log_pixel, relight, to_log, Decomposition, GrayIndex};
use crate::linalg::{dot, Vec3};
use crate::params::{all_presets, estimate_k, load_spd, preset, KSearch, ModelParams, SpdKind};
use crate::restore::{correct, neutral_set, NeutralSet, DEFAULT_EPSILON, DEFAULT_KAPPA};

/// Gray level that the relit invariant images use for the neutral axis.
pub const DEFAULT_REFERENCE_LEVEL: u8 = 128;

/// Fraction of pixels with two or more saturated channels above which an
/// over-exposure warning is attached.
pub const OVEREXPOSURE_FRACTION: f64 = 0.05;

/// Numeric settings of the restoration stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    /// Radius of the neutral set.
    pub epsilon: f64,
    /// Falloff steepness of the color correction.
    pub kappa: f64,
    /// The invariant vectors carry no illumination; before exponentiation
    /// they are all moved to the illumination coordinate at which a neutral
    /// pixel of this 8-bit level sits, so that a gray of this level renders
    /// as itself.
    pub reference_level: u8,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            kappa: DEFAULT_KAPPA,
            reference_level: DEFAULT_REFERENCE_LEVEL,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Argument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::Argument(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        Ok(())
    }

    /// `α` of the neutral pixel `(g, g, g)` with `g = reference_level`.
    pub fn reference_alpha(&self, u0: Vec3) -> f64 {
        let l = self.reference_level;
        dot(log_pixel([l, l, l]), u0)
    }
}

/// Every intermediate of one run.
#[derive(Clone, Debug)]
pub struct Stages {
    pub u: LogImage,
    pub decomposition: Decomposition,
    pub neutral: NeutralSet,
    pub uc: LogImage,
    /// `u_p` rendered to RGB: the color illumination-invariant image.
    pub invariant_rgb: RgbImage,
    /// `u_c` rendered to RGB.
    pub corrected_rgb: RgbImage,
    pub shadow_free: RgbImage,
}

/// Steps 5–8: render `u_p` and `u_c`, then recombine in Lab.
///
/// Returns `(u_p in RGB, u_c in RGB, shadow-free image)`.
pub fn render(up: &LogImage, uc: &LogImage, u0: Vec3, settings: &Settings) -> Result<(RgbImage, RgbImage, RgbImage)> {
    let alpha_ref = settings.reference_alpha(u0);
    let up_rgb = from_log(&relight(up, u0, alpha_ref));
    let uc_rgb = from_log(&relight(uc, u0, alpha_ref));
    let out = recombine(&uc_rgb, &up_rgb)?;
    Ok((up_rgb, uc_rgb, out))
}

pub fn run_stages(image: &RgbImage, params: &ModelParams, settings: &Settings) -> Result<Stages> {
    settings.validate()?;
    let u0 = params.u0();
    let u = to_log(image);
    let decomposition = decompose(image, params);
    let neutral = neutral_set(&u, u0, settings.epsilon)?;
    let uc = correct(&decomposition.up, &u, u0, &neutral, settings.kappa)?;
    let (invariant_rgb, corrected_rgb, shadow_free) = render(&decomposition.up, &uc, u0, settings)?;
    Ok(Stages {
        u,
        decomposition,
        neutral,
        uc,
        invariant_rgb,
        corrected_rgb,
        shadow_free,
    })
}

/// Intermediate products that can be requested from [`shadow_free`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emit {
    Invariant,
    ShadowFree,
    Alpha,
    Gray1,
    Gray2,
    Gray3,
    Mask,
}

impl Emit {
    pub const ALL: [Emit; 7] = [
        Emit::Invariant,
        Emit::ShadowFree,
        Emit::Alpha,
        Emit::Gray1,
        Emit::Gray2,
        Emit::Gray3,
        Emit::Mask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Emit::Invariant => "invariant",
            Emit::ShadowFree => "shadow_free",
            Emit::Alpha => "alpha",
            Emit::Gray1 => "gray1",
            Emit::Gray2 => "gray2",
            Emit::Gray3 => "gray3",
            Emit::Mask => "mask",
        }
    }
}

impl fmt::Display for Emit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        Emit::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown output {s:?}")))
    }
}

pub fn parse_emit_list(s: &str) -> Result<BTreeSet<Emit>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// Where model parameters come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamsSource {
    Preset(String),
    /// Fit `K` from measured spectra: daylight, skylight, then the R, G, B
    /// matching functions.
    Spd {
        day: PathBuf,
        sky: PathBuf,
        matching: [PathBuf; 3],
        search: KSearch,
    },
    /// Pick the lowest-entropy candidate among the named presets.
    Entropy(Vec<String>),
}

impl FromStr for ParamsSource {
    type Err = Error;

    /// `preset:<label>` (or a bare label), `spd:<day>,<sky>,<r>,<g>,<b>`,
    /// `entropy:all` or `entropy:<label>,<label>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(':').unwrap_or(("preset", s));
        let list: Vec<String> = rest
            .split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect();
        match kind.trim() {
            "preset" => Ok(ParamsSource::Preset(rest.trim().to_string())),
            "spd" => {
                let [day, sky, r, g, b]: [String; 5] = list.try_into().map_err(|_| {
                    Error::Argument("spd source needs five paths: day,sky,r,g,b".into())
                })?;
                Ok(ParamsSource::Spd {
                    day: day.into(),
                    sky: sky.into(),
                    matching: [r.into(), g.into(), b.into()],
                    search: KSearch::default(),
                })
            }
            "entropy" => {
                if list.is_empty() || list == ["all"] {
                    Ok(ParamsSource::Entropy(
                        crate::params::preset_labels().iter().map(|s| s.to_string()).collect(),
                    ))
                } else {
                    Ok(ParamsSource::Entropy(list))
                }
            }
            other => Err(Error::Argument(format!("unknown parameter source {other:?}"))),
        }
    }
}

impl ParamsSource {
    pub fn resolve(&self, image: &RgbImage) -> Result<ModelParams> {
        match self {
            ParamsSource::Preset(label) => preset(label),
            ParamsSource::Spd {
                day,
                sky,
                matching,
                search,
            } => {
                let day = load_spd(day, SpdKind::Illuminant)?;
                let sky = load_spd(sky, SpdKind::Illuminant)?;
                let q = [
                    load_spd(&matching[0], SpdKind::MatchingR)?,
                    load_spd(&matching[1], SpdKind::MatchingG)?,
                    load_spd(&matching[2], SpdKind::MatchingB)?,
                ];
                let k = estimate_k(&day, &sky, [&q[0], &q[1], &q[2]], *search)?;
                ModelParams::from_k(k, "spd")
            }
            ParamsSource::Entropy(labels) => {
                let candidates = labels.iter().map(|l| preset(l)).collect::<Result<Vec<_>>>()?;
                select_params_by_entropy(image, &candidates).cloned()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub params_source: ParamsSource,
    pub settings: Settings,
    pub emit: BTreeSet<Emit>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            params_source: ParamsSource::Preset("mean".into()),
            settings: Settings::default(),
            emit: BTreeSet::from([Emit::ShadowFree]),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.emit.is_empty() {
            return Err(Error::Argument("nothing to emit".into()));
        }
        Ok(())
    }
}

/// Optional values read from a `key = value` config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
    pub reference_level: Option<u8>,
    pub params_source: Option<ParamsSource>,
    pub emit: Option<BTreeSet<Emit>>,
}

impl ConfigFile {
    /// Keys: `epsilon`, `kappa`, `reference_level`, `params_source`, `emit`.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let value = value.trim();
            let number = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}")));
            match key.trim() {
                "epsilon" => cfg.epsilon = Some(number(value)?),
                "kappa" => cfg.kappa = Some(number(value)?),
                "reference_level" => {
                    cfg.reference_level =
                        Some(value.parse().map_err(|_| err(format!("bad 8-bit level {value:?}")))?)
                }
                "params_source" | "params" => {
                    cfg.params_source = Some(value.parse().map_err(|e: Error| err(e.to_string()))?)
                }
                "emit" => cfg.emit = Some(parse_emit_list(value).map_err(|e| err(e.to_string()))?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = self.epsilon {
            cfg.settings.epsilon = v;
        }
        if let Some(v) = self.kappa {
            cfg.settings.kappa = v;
        }
        if let Some(v) = self.reference_level {
            cfg.settings.reference_level = v;
        }
        if let Some(v) = &self.params_source {
            cfg.params_source = v.clone();
        }
        if let Some(v) = &self.emit {
            cfg.emit = v.clone();
        }
    }
}

/// Products of [`shadow_free`]; only the requested ones are filled.
#[derive(Clone, Debug, Default)]
pub struct PipelineOutput {
    pub params: Option<ModelParams>,
    pub invariant: Option<RgbImage>,
    pub shadow_free: Option<RgbImage>,
    pub alpha: Option<ScalarImage>,
    pub gray: [Option<ScalarImage>; 3],
    pub mask: Option<Mask>,
    pub warnings: Vec<String>,
}

pub fn shadow_free(image: &RgbImage, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let params = cfg.params_source.resolve(image)?;
    let stages = run_stages(image, &params, &cfg.settings)?;
    let mut out = PipelineOutput {
        warnings: overexposure_warning(image).into_iter().collect(),
        ..Default::default()
    };
    for &e in &cfg.emit {
        match e {
            Emit::Invariant => out.invariant = Some(stages.invariant_rgb.clone()),
            Emit::ShadowFree => out.shadow_free = Some(stages.shadow_free.clone()),
            Emit::Alpha => out.alpha = Some(stages.decomposition.alpha.clone()),
            Emit::Gray1 | Emit::Gray2 | Emit::Gray3 => {
                let idx = match e {
                    Emit::Gray1 => GrayIndex::One,
                    Emit::Gray2 => GrayIndex::Two,
                    _ => GrayIndex::Three,
                };
                out.gray[idx as usize] = Some(gray_invariant_image(image, &params, idx));
            }
            Emit::Mask => out.mask = Some(stages.neutral.mask.clone()),
        }
    }
    out.params = Some(params);
    Ok(out)
}

/// Warns when more than 5% of pixels have two or more channels at 255; such
/// pixels do not follow the shadow model.
pub fn overexposure_warning(image: &RgbImage) -> Option<String> {
    let n = image
        .pixels()
        .iter()
        .filter(|p| p.iter().filter(|&&c| c == 255).count() >= 2)
        .count();
    let frac = n as f64 / image.pixels().len() as f64;
    (frac > OVEREXPOSURE_FRACTION).then(|| {
        format!(
            "{:.1}% of pixels are over-exposed; the decomposition is unreliable there",
            100.0 * frac
        )
    })
}

/// Fraction of values discarded at each end before binning.
pub const ENTROPY_TAIL: f64 = 0.025;
pub const ENTROPY_BINS: usize = 64;

/// Shannon entropy (bits) of the histogram of `values` after trimming 2.5%
/// from each tail, over 64 uniform bins spanning the retained range.
pub fn histogram_entropy(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = (ENTROPY_TAIL * v.len() as f64).floor() as usize;
    let kept = &v[cut..v.len() - cut];
    let (Some(&lo), Some(&hi)) = (kept.first(), kept.last()) else {
        return 0.0;
    };
    let span = hi - lo;
    if !(span > 0.0) {
        return 0.0;
    }
    let mut counts = [0usize; ENTROPY_BINS];
    for &x in kept {
        let b = (((x - lo) / span) * ENTROPY_BINS as f64) as usize;
        counts[b.min(ENTROPY_BINS - 1)] += 1;
    }
    let n = kept.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy of the first gray invariant image under `params`.
pub fn invariant_entropy(image: &RgbImage, params: &ModelParams) -> f64 {
    histogram_entropy(gray_invariant_image(image, params, GrayIndex::One).values())
}

/// The candidate whose first gray invariant has the lowest entropy; the
/// earliest candidate wins ties.
pub fn select_params_by_entropy<'a>(image: &RgbImage, candidates: &'a [ModelParams]) -> Result<&'a ModelParams> {
    if candidates.is_empty() {
        return Err(Error::Argument("no candidate parameters".into()));
    }
    let mut best = (0, invariant_entropy(image, &candidates[0]));
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let e = invariant_entropy(image, c);
        if e < best.1 {
            best = (i, e);
        }
    }
    Ok(&candidates[best.0])
}

/// Entropy-selection over all built-in presets.
pub fn select_preset_by_entropy(image: &RgbImage) -> ModelParams {
    let presets = all_presets();
    select_params_by_entropy(image, &presets)
        .expect("preset list is nonempty")
        .clone()
}

/// Normalized 8-bit export of the alpha field.
pub fn alpha_image(d: &Decomposition) -> GrayImage {
    d.alpha.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::preset;

    #[test]
    fn constant_image_gives_constant_output() {
        let img = RgbImage::filled(6, 5, [120, 80, 60]).unwrap();
        for label in ["mean", "20deg", "70deg"] {
            let s = run_stages(&img, &preset(label).unwrap(), &Settings::default()).unwrap();
            let first = s.shadow_free.pixels()[0];
            assert!(s.shadow_free.pixels().iter().all(|&p| p == first));
        }
    }

    #[test]
    fn gray_reference_renders_as_itself() {
        let params = ModelParams::from_k([2.0, 2.0, 2.0], "flat").unwrap();
        let img = RgbImage::filled(2, 2, [128; 3]).unwrap();
        let s = run_stages(&img, &params, &Settings::default()).unwrap();
        assert!(s.invariant_rgb.pixels().iter().all(|&p| p == [128; 3]));
    }

    #[test]
    fn single_candidate_and_ties() {
        let img = RgbImage::from_fn(8, 8, |x, y| [(x * 30) as u8, (y * 30) as u8, 50]).unwrap();
        let one = vec![preset("30deg").unwrap()];
        assert_eq!(select_params_by_entropy(&img, &one).unwrap(), &one[0]);
        let a = ModelParams::from_rounded_betas([2.299, 1.977, 1.770], "first").unwrap();
        let b = ModelParams::from_rounded_betas([2.299, 1.977, 1.770], "second").unwrap();
        let pair = [a, b];
        assert_eq!(select_params_by_entropy(&img, &pair).unwrap().label(), "first");
        assert!(select_params_by_entropy(&img, &[]).is_err());
    }

    #[test]
    fn entropy_of_simple_histograms() {
        assert_eq!(histogram_entropy(&[1.0; 10]), 0.0);
        assert_eq!(histogram_entropy(&[]), 0.0);
        let two: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        assert!((histogram_entropy(&two) - 1.0).abs() < 1e-12);
        // 210 values, 5 trimmed per tail; the outliers never reach a bin
        let mut v: Vec<f64> = (0..200).map(|i| (i % 4) as f64).collect();
        v.extend([-1e9; 5]);
        v.extend([1e9; 5]);
        assert!((histogram_entropy(&v) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overexposure_threshold() {
        let mut px = vec![[10u8; 3]; 100];
        for p in px.iter_mut().take(5) {
            *p = [255, 255, 0];
        }
        let img = RgbImage::new(10, 10, px.clone()).unwrap();
        assert!(overexposure_warning(&img).is_none());
        px[5] = [255, 255, 255];
        let img = RgbImage::new(10, 10, px).unwrap();
        assert!(overexposure_warning(&img).is_some());
    }

    #[test]
    fn config_file_parsing() {
        let cfg = ConfigFile::parse(
            "# comment\nepsilon = 0.2\nkappa=0.05\nparams_source = entropy:20deg,mean\nemit = shadow_free, alpha,mask\n",
        )
        .unwrap();
        assert_eq!(cfg.epsilon, Some(0.2));
        assert_eq!(cfg.kappa, Some(0.05));
        assert_eq!(
            cfg.params_source,
            Some(ParamsSource::Entropy(vec!["20deg".into(), "mean".into()]))
        );
        assert_eq!(
            cfg.emit,
            Some(BTreeSet::from([Emit::ShadowFree, Emit::Alpha, Emit::Mask]))
        );
        let mut pc = PipelineConfig::default();
        cfg.apply(&mut pc);
        assert_eq!(pc.settings.epsilon, 0.2);
        assert!(matches!(ConfigFile::parse("nope = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(ConfigFile::parse("\nepsilon 3"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn params_source_parsing() {
        assert_eq!("mean".parse::<ParamsSource>().unwrap(), ParamsSource::Preset("mean".into()));
        assert_eq!(
            "preset:40deg".parse::<ParamsSource>().unwrap(),
            ParamsSource::Preset("40deg".into())
        );
        match "entropy:all".parse::<ParamsSource>().unwrap() {
            ParamsSource::Entropy(l) => assert_eq!(l.len(), 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!("spd:a,b,c,d,e".parse::<ParamsSource>(), Ok(ParamsSource::Spd { .. })));
        assert!("spd:a,b".parse::<ParamsSource>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::default();
        cfg.emit.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.settings.epsilon = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn emits_only_requested_outputs() {
        let img = RgbImage::from_fn(10, 10, |x, y| [(x * 20) as u8, (y * 20) as u8, 200]).unwrap();
        let cfg = PipelineConfig {
            emit: BTreeSet::from([Emit::Alpha, Emit::Gray2]),
            ..Default::default()
        };
        let out = shadow_free(&img, &cfg).unwrap();
        assert!(out.alpha.is_some() && out.gray[1].is_some());
        assert!(out.shadow_free.is_none() && out.invariant.is_none() && out.gray[0].is_none());
        assert_eq!(out.params.unwrap().label(), "mean");
    }
}
