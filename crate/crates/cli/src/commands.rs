use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use shadowfree_core::image::{Mask, RgbImage};
use shadowfree_core::invariant::{decompose, gray_invariant_image, GrayIndex};
use shadowfree_core::io::{self as sio, FloatRaster};
use shadowfree_core::params::{
    betas_from_k, estimate_k, load_spd, preset, presets_to_text, validate_identity, KSearch, ModelParams, SpdKind,
};
use shadowfree_core::pipeline::{
    invariant_entropy, overexposure_warning, parse_emit_list, run_stages, shadow_free, ConfigFile, Emit,
    ParamsSource, PipelineConfig,
};
use shadowfree_core::simeval::{invariance_report, synthesize_shadow, ReportParams, ShadowSpec};

use crate::args::*;
use crate::error::CliError;
use crate::files::{gray_path, jobs, read_gray, read_rgb, sibling, write_gray, write_rgb};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Shadowfree(a) => shadowfree_cmd(a),
        Command::Invariant(a) => raster_cmd(&a, Raster::Invariant),
        Command::Gray(a) => {
            let idx = GrayIndex::from_number(a.index)?;
            raster_cmd(&a.raster, Raster::Gray(idx))
        }
        Command::Alpha(a) => raster_cmd(&a, Raster::Alpha),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Params(a) => params_cmd(a),
        Command::EntropySelect(a) => entropy_cmd(a),
    }
}

fn warn(path: &Path, msg: &str) {
    eprintln!("warning: {}: {msg}", path.display());
}

/// Defaults, then the config file, then command-line flags.
fn pipeline_config(source: &SourceArgs, tuning: &TuningArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &tuning.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        ConfigFile::parse(&text)
            .map_err(|e| CliError::from(e).at(path))?
            .apply(&mut cfg);
    }
    if let Some(label) = &source.preset {
        cfg.params_source = ParamsSource::Preset(label.clone());
    }
    if let Some([day, sky, r, g, b]) = &source.spd {
        cfg.params_source = ParamsSource::Spd {
            day: day.clone(),
            sky: sky.clone(),
            matching: [r.clone(), g.clone(), b.clone()],
            search: KSearch::default(),
        };
    }
    if let Some(list) = &source.entropy {
        cfg.params_source = format!("entropy:{list}").parse()?;
    }
    if let Some(v) = tuning.epsilon {
        cfg.settings.epsilon = v;
    }
    if let Some(v) = tuning.kappa {
        cfg.settings.kappa = v;
    }
    if let Some(v) = tuning.reference_level {
        cfg.settings.reference_level = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `f` over every job in parallel; reports all failures and returns the
/// first (in file order).
fn for_each_job(input: &Path, output: &Path, f: impl Fn(&Path, &Path) -> Result<()> + Sync) -> Result<()> {
    let jobs = jobs(input, output)?;
    if jobs.is_empty() {
        return Err(CliError::Usage(format!("{}: no images found", input.display())));
    }
    let results: Vec<Result<()>> = jobs.par_iter().map(|(i, o)| f(i, o)).collect();
    let mut first = None;
    for r in results {
        if let Err(e) = r {
            if jobs.len() > 1 {
                eprintln!("error: {e}");
            }
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

fn shadowfree_cmd(a: ShadowfreeArgs) -> Result<()> {
    let mut cfg = pipeline_config(&a.source, &a.tuning)?;
    if let Some(list) = &a.emit {
        cfg.emit = parse_emit_list(list)?;
    }
    if a.mask.is_some() {
        cfg.emit.insert(Emit::Mask);
    }
    cfg.validate()?;
    let batch = a.input.is_dir();
    if batch && a.mask.is_some() {
        return Err(CliError::Usage("--mask takes a single file; use --emit mask for directories".into()));
    }
    for_each_job(&a.input, &a.output, |input, output| {
        let img = read_rgb(input)?;
        let out = shadow_free(&img, &cfg).map_err(|e| CliError::from(e).at(input))?;
        for w in &out.warnings {
            warn(input, w);
        }
        if let Some(img) = &out.shadow_free {
            write_rgb(output, img)?;
        }
        if let Some(img) = &out.invariant {
            write_rgb(&sibling(output, "invariant", false), img)?;
        }
        if let Some(alpha) = &out.alpha {
            write_gray(&sibling(output, "alpha", true), &alpha.normalized())?;
        }
        for (i, g) in out.gray.iter().enumerate() {
            if let Some(g) = g {
                write_gray(&sibling(output, &format!("gray{}", i + 1), true), &g.normalized())?;
            }
        }
        if let Some(mask) = &out.mask {
            let path = match &a.mask {
                Some(p) if !batch => p.clone(),
                _ => sibling(output, "mask", true),
            };
            write_gray(&path, &mask.to_gray())?;
        }
        Ok(())
    })
}

#[derive(Clone, Copy)]
enum Raster {
    Invariant,
    Gray(GrayIndex),
    Alpha,
}

fn raster_cmd(a: &RasterArgs, kind: Raster) -> Result<()> {
    let cfg = pipeline_config(&a.source, &a.tuning)?;
    if a.float.is_some() && a.input.is_dir() {
        return Err(CliError::Usage("--float takes a single input file".into()));
    }
    for_each_job(&a.input, &a.output, |input, output| {
        let img = read_rgb(input)?;
        if let Some(w) = overexposure_warning(&img) {
            warn(input, &w);
        }
        let params = cfg.params_source.resolve(&img).map_err(|e| CliError::from(e).at(input))?;
        let float = match kind {
            Raster::Invariant => {
                let stages = run_stages(&img, &params, &cfg.settings)?;
                write_rgb(output, &stages.invariant_rgb)?;
                FloatRaster::from(&stages.decomposition.up)
            }
            Raster::Gray(idx) => {
                let g = gray_invariant_image(&img, &params, idx);
                write_gray(&gray_path(output), &g.normalized())?;
                FloatRaster::from(&g)
            }
            Raster::Alpha => {
                let d = decompose(&img, &params);
                write_gray(&gray_path(output), &d.alpha.normalized())?;
                FloatRaster::from(&d.alpha)
            }
        };
        if let Some(path) = &a.float {
            sio::write_upf(path, &float).map_err(|e| CliError::from(e).at(path))?;
        }
        Ok(())
    })
}

fn read_mask(path: &Path, like: &RgbImage) -> Result<Mask> {
    let mask = Mask::from_gray(&read_gray(path)?);
    if mask.width() != like.width() || mask.height() != like.height() {
        return Err(CliError::Usage(format!(
            "{}: mask is {}×{} but the image is {}×{}",
            path.display(),
            mask.width(),
            mask.height(),
            like.width(),
            like.height()
        )));
    }
    Ok(mask)
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let k = match (&a.k, &a.preset, a.mean_k) {
        (Some(k), _, _) => *k,
        (None, Some(label), Some(mean)) => preset(label)?.implied_k(mean)?,
        _ => return Err(CliError::Usage("give --k, or --preset with --mean-k".into())),
    };
    let img = read_rgb(&a.input)?;
    let spec = ShadowSpec {
        mask: read_mask(&a.mask, &img)?,
        penumbra_width: a.penumbra,
        k,
    };
    write_rgb(&a.output, &synthesize_shadow(&img, &spec)?)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let cfg = pipeline_config(&SourceArgs::default(), &a.tuning)?;
    let base = read_rgb(&a.base)?;
    let mask = read_mask(&a.mask, &base)?;
    let specs: Vec<ShadowSpec> = a
        .k
        .iter()
        .map(|&k| ShadowSpec {
            mask: mask.clone(),
            penumbra_width: a.penumbra,
            k,
        })
        .collect();
    let params = match &a.preset {
        Some(label) => ReportParams::Fixed(preset(label)?),
        None => ReportParams::FromShadow,
    };
    let report = invariance_report(&base, &specs, &params, &cfg.settings)?;
    match &a.output {
        None => print!("{}", report.to_table()),
        Some(path) => {
            let table = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt"));
            let text = if table { report.to_table() } else { report.to_csv() };
            fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn describe(p: &ModelParams) -> String {
    let mut s = String::new();
    let b = p.beta();
    let u = p.u0();
    let _ = writeln!(s, "label: {}", p.label());
    if let Some(k) = p.k() {
        let _ = writeln!(s, "k: {:.6},{:.6},{:.6}", k[0], k[1], k[2]);
    }
    let _ = writeln!(s, "beta: {:.12},{:.12},{:.12}", b[0], b[1], b[2]);
    let _ = writeln!(s, "u0: {:.12},{:.12},{:.12}", u[0], u[1], u[2]);
    let _ = writeln!(s, "null_residual: {:.3e}", p.null_residual());
    s
}

fn params_cmd(a: ParamsArgs) -> Result<()> {
    let text = if let Some(label) = &a.preset {
        describe(&preset(label)?)
    } else if let Some(k) = a.k {
        betas_from_k(k)?;
        describe(&ModelParams::from_k(k, "k")?)
    } else if let Some([day, sky, r, g, b]) = &a.spd {
        let defaults = KSearch::default();
        let [lower, upper] = a.k_range.unwrap_or([defaults.lower, defaults.upper]);
        let search = KSearch {
            lower,
            upper,
            step: a.k_step.unwrap_or(defaults.step),
        };
        let load = |p: &PathBuf, kind| load_spd(p, kind).map_err(|e| CliError::from(e).at(p));
        let q = [
            load(r, SpdKind::MatchingR)?,
            load(g, SpdKind::MatchingG)?,
            load(b, SpdKind::MatchingB)?,
        ];
        let k = estimate_k(
            &load(day, SpdKind::Illuminant)?,
            &load(sky, SpdKind::Illuminant)?,
            [&q[0], &q[1], &q[2]],
            search,
        )?;
        describe(&ModelParams::from_k(k, "spd")?)
    } else if let Some(beta) = a.beta {
        let check = validate_identity(beta, a.tol);
        format!(
            "residual: {:.6e}\nwithin_tol: {}\n",
            check.residual, check.within_tol
        )
    } else {
        presets_to_text()
    };
    match &a.output {
        None => print!("{text}"),
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
    }
    Ok(())
}

fn entropy_cmd(a: EntropyArgs) -> Result<()> {
    let img = read_rgb(&a.input)?;
    let labels = match format!("entropy:{}", a.candidates).parse()? {
        ParamsSource::Entropy(labels) => labels,
        _ => unreachable!("entropy prefix always parses to an entropy source"),
    };
    let candidates = labels.iter().map(|l| preset(l)).collect::<std::result::Result<Vec<_>, _>>()?;
    let chosen = ParamsSource::Entropy(labels).resolve(&img)?;
    for c in &candidates {
        println!("{},{:.6}", c.label(), invariant_entropy(&img, c));
    }
    println!("selected: {}", chosen.label());
    Ok(())
}
