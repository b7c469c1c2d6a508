use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Shadow-free and illumination-invariant images by pixel-wise orthogonal
/// decomposition in log-RGB space.
///
/// Images are read and written as binary PPM/PGM or PNG, chosen by file
/// extension. A directory given as input processes every image in it.
#[derive(Debug, Parser)]
#[command(name = "shadowfree", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove shadows: the full pipeline from log transform to Lab recombination.
    Shadowfree(ShadowfreeArgs),
    /// Color illumination-invariant image (the orthogonal component u_p).
    Invariant(RasterArgs),
    /// One of the three gray-scale invariant images, normalized to 0–255.
    Gray(GrayArgs),
    /// Illumination coordinate α of every pixel, normalized to 0–255.
    Alpha(RasterArgs),
    /// Apply a synthetic shadow to an image.
    Simulate(SimulateArgs),
    /// Compare originals, invariant and shadow-free images of shadowed variants.
    Eval(EvalArgs),
    /// Print presets, derive betas from K, estimate K from spectra, or check betas.
    Params(ParamsArgs),
    /// Score candidate presets by invariant-image entropy and pick the lowest.
    EntropySelect(EntropyArgs),
}

/// Where the model parameters come from. At most one may be given; the
/// default is the `mean` preset (or the config file's `params_source`).
#[derive(Debug, Args, Default)]
pub struct SourceArgs {
    /// Built-in preset: 20deg … 80deg or mean.
    #[arg(long, group = "source")]
    pub preset: Option<String>,
    /// Fit K from spectra: daylight, skylight, then the R, G, B matching functions.
    #[arg(long, group = "source", value_name = "DAY,SKY,R,G,B", value_parser = parse_paths)]
    pub spd: Option<[PathBuf; 5]>,
    /// Pick by minimal entropy among presets: `all` or a comma-separated list.
    #[arg(long, group = "source", value_name = "LABELS")]
    pub entropy: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TuningArgs {
    /// Radius of the neutral set.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Steepness of the color-correction falloff.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Gray level at which invariant images are rendered.
    #[arg(long)]
    pub reference_level: Option<u8>,
    /// `key = value` config file; flags given on the command line win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShadowfreeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Products to write: invariant, shadow_free, alpha, gray1, gray2, gray3, mask.
    /// Anything besides shadow_free goes next to the output as `<stem>.<name>.<ext>`.
    #[arg(long, value_name = "LIST")]
    pub emit: Option<String>,
    /// Also write the neutral-set mask to this PGM.
    #[arg(long, value_name = "PATH")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Also write the un-normalized float raster as UPF1.
    #[arg(long, value_name = "PATH")]
    pub float: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GrayArgs {
    #[command(flatten)]
    pub raster: RasterArgs,
    /// Which invariant: 1, 2 or 3.
    #[arg(long, default_value_t = 1)]
    pub index: u8,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Shadow mask PGM; nonzero pixels are in shadow.
    #[arg(long)]
    pub mask: PathBuf,
    /// Per-channel ratio K_R,K_G,K_B.
    #[arg(long, value_name = "KR,KG,KB", value_parser = parse_triple, conflicts_with = "preset")]
    pub k: Option<[f64; 3]>,
    /// Use a preset's implied K instead, scaled to `--mean-k`.
    #[arg(long, requires = "mean_k")]
    pub preset: Option<String>,
    /// Geometric mean of the implied K.
    #[arg(long)]
    pub mean_k: Option<f64>,
    /// Width of the soft band around the mask, in pixels.
    #[arg(long, default_value_t = 0)]
    pub penumbra: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub base: PathBuf,
    /// Shadow mask PGM, shared by all variants.
    #[arg(long)]
    pub mask: PathBuf,
    /// K of one shadowed variant; repeat for more variants.
    #[arg(long, value_name = "KR,KG,KB", value_parser = parse_triple, required = true)]
    pub k: Vec<[f64; 3]>,
    /// Process every image with this preset; by default each variant uses its own K.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub penumbra: usize,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Report path; the table layout is used for `.txt`, CSV otherwise.
    /// Without it the table goes to standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// Show one preset.
    #[arg(long, group = "what")]
    pub preset: Option<String>,
    /// Derive betas from K_R,K_G,K_B.
    #[arg(long, group = "what", value_name = "KR,KG,KB", value_parser = parse_triple)]
    pub k: Option<[f64; 3]>,
    /// Estimate K from spectra: daylight, skylight, R, G, B matching functions.
    #[arg(long, group = "what", value_name = "DAY,SKY,R,G,B", value_parser = parse_paths)]
    pub spd: Option<[PathBuf; 5]>,
    /// Check the identity 2 + β1 + β2 + β3 − β1β2β3 = 0.
    #[arg(long, group = "what", value_name = "B1,B2,B3", value_parser = parse_triple)]
    pub beta: Option<[f64; 3]>,
    /// Tolerance for `--beta`.
    #[arg(long, default_value_t = 5e-3)]
    pub tol: f64,
    /// K search grid for `--spd`: lower,upper.
    #[arg(long, value_name = "LOW,HIGH", value_parser = parse_pair)]
    pub k_range: Option<[f64; 2]>,
    #[arg(long)]
    pub k_step: Option<f64>,
    /// Write to a file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    pub input: PathBuf,
    /// `all` or a comma-separated list of preset labels.
    #[arg(long, default_value = "all")]
    pub candidates: String,
}

fn parse_numbers<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(out)
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    parse_numbers(s)
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_numbers(s)
}

fn parse_paths(s: &str) -> Result<[PathBuf; 5], String> {
    let parts: Vec<PathBuf> = s.split(',').map(|p| PathBuf::from(p.trim())).collect();
    parts
        .try_into()
        .map_err(|_| "expected five comma-separated paths: day,sky,r,g,b".to_string())
}
