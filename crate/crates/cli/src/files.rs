//! Image files by extension, and directory batches.

use std::fs;
use std::path::{Path, PathBuf};

use shadowfree_core::image::{GrayImage, RgbImage};
use shadowfree_core::io;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Netpbm,
    Png,
}

fn format_of(path: &Path) -> Result<Format, CliError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "ppm" | "pgm" | "pnm" => Ok(Format::Netpbm),
        "png" => Ok(Format::Png),
        _ => Err(CliError::Usage(format!(
            "{}: unsupported image extension (use .ppm, .pgm or .png)",
            path.display()
        ))),
    }
}

pub fn is_image(path: &Path) -> bool {
    path.is_file() && format_of(path).is_ok()
}

fn in_context<T>(path: &Path, r: Result<T, CliError>) -> Result<T, CliError> {
    r.map_err(|e| e.at(path))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage, CliError> {
    in_context(path, (|| match format_of(path)? {
        Format::Netpbm => Ok(io::read_ppm(path)?),
        Format::Png => {
            let img = image::open(path)?.into_rgb8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            let px = img.pixels().map(|p| p.0).collect();
            Ok(RgbImage::new(w, h, px)?)
        }
    })())
}

pub fn read_gray(path: &Path) -> Result<GrayImage, CliError> {
    in_context(path, (|| match format_of(path)? {
        Format::Netpbm => Ok(io::read_pgm(path)?),
        Format::Png => {
            let img = image::open(path)?.into_luma8();
            let (w, h) = (img.width() as usize, img.height() as usize);
            Ok(GrayImage::new(w, h, img.into_raw())?)
        }
    })())
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<(), CliError> {
    in_context(path, (|| match format_of(path)? {
        Format::Netpbm => Ok(io::write_ppm(path, img)?),
        Format::Png => {
            let raw: Vec<u8> = img.pixels().iter().flatten().copied().collect();
            let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, raw)
                .expect("buffer matches dimensions");
            Ok(buf.save_with_format(path, image::ImageFormat::Png)?)
        }
    })())
}

pub fn write_gray(path: &Path, img: &GrayImage) -> Result<(), CliError> {
    in_context(path, (|| match format_of(path)? {
        Format::Netpbm => Ok(io::write_pgm(path, img)?),
        Format::Png => {
            let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.pixels().to_vec())
                .expect("buffer matches dimensions");
            Ok(buf.save_with_format(path, image::ImageFormat::Png)?)
        }
    })())
}

/// Gray output next to an RGB-named path: `.ppm` becomes `.pgm`.
pub fn gray_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pnm") => path.with_extension("pgm"),
        _ => path.to_path_buf(),
    }
}

/// `<stem>.<name>.<ext>` beside `path`.
pub fn sibling(path: &Path, name: &str, gray: bool) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("ppm");
    let ext = if gray && (ext == "ppm" || ext == "pnm") { "pgm" } else { ext };
    path.with_file_name(format!("{stem}.{name}.{ext}"))
}

/// Input/output pairs: a single file, or every image in a directory mapped
/// to the same file name in the output directory (created if missing).
pub fn jobs(input: &Path, output: &Path) -> Result<Vec<(PathBuf, PathBuf)>, CliError> {
    if !input.exists() {
        return Err(CliError::Io(format!("{}: no such file or directory", input.display())));
    }
    if !input.is_dir() {
        return Ok(vec![(input.to_path_buf(), output.to_path_buf())]);
    }
    fs::create_dir_all(output).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|f| {
            let out = output.join(f.file_name().expect("directory entries have names"));
            (f, out)
        })
        .collect())
}
