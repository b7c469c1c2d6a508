//! Binary PPM (P6), PGM (P5) and UPF1 float rasters.
//!
//! UPF1 layout: magic `UPF1`, `u32` width, `u32` height, `u8` channel count,
//! then little-endian `f32` samples in row-major, channel-interleaved order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{GrayImage, LogImage, Mask, RgbImage, ScalarImage};

const UPF_MAGIC: &[u8; 4] = b"UPF1";

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn netpbm_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format("PNM", "missing magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PNM", "malformed header"))?;
    }
    // exactly one whitespace byte before the raster
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format("PNM", "malformed header"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format("PNM", "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("PNM", format!("maxval {maxval} out of range")));
    }
    Ok(Header {
        magic,
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos + 1,
    })
}

/// Samples scaled to 8 bits; 16-bit samples are big-endian.
fn netpbm_samples(bytes: &[u8], h: &Header, channels: usize) -> Result<Vec<u8>> {
    let n = h
        .width
        .checked_mul(h.height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| Error::format("PNM", "image too large"))?;
    let wide = h.maxval > 255;
    let need = if wide { 2 * n } else { n };
    let data = bytes
        .get(h.data_start..h.data_start + need)
        .ok_or_else(|| Error::format("PNM", "truncated raster"))?;
    let max = h.maxval as u64;
    let rescale = |v: u64| -> Result<u8> {
        if v > max {
            return Err(Error::format("PNM", "sample exceeds maxval"));
        }
        Ok(((v * 255 + max / 2) / max) as u8)
    };
    if wide {
        data.chunks_exact(2)
            .map(|c| rescale(u16::from_be_bytes([c[0], c[1]]) as u64))
            .collect()
    } else if h.maxval == 255 {
        Ok(data.to_vec())
    } else {
        data.iter().map(|&v| rescale(v as u64)).collect()
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let h = netpbm_header(bytes)?;
    if &h.magic != b"P6" {
        return Err(Error::format("PPM", "expected binary PPM (P6)"));
    }
    let samples = netpbm_samples(bytes, &h, 3)?;
    let px = samples.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    RgbImage::new(h.width, h.height, px)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let h = netpbm_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::format("PGM", "expected binary PGM (P5)"));
    }
    GrayImage::new(h.width, h.height, netpbm_samples(bytes, &h, 1)?)
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().flatten());
    out
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_ppm(&fs::read(path)?)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_ppm(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    Ok(fs::write(path, encode_ppm(img))?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    Ok(fs::write(path, encode_pgm(img))?)
}

/// A mask read from a PGM; nonzero samples are set.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Ok(Mask::from_gray(&read_pgm(path)?))
}

/// A float raster with 1 or 3 channels, as stored in UPF1.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatRaster {
    pub width: usize,
    pub height: usize,
    pub channels: u8,
    pub data: Vec<f32>,
}

impl From<&ScalarImage> for FloatRaster {
    fn from(img: &ScalarImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 1,
            data: img.values().iter().map(|&v| v as f32).collect(),
        }
    }
}

impl From<&LogImage> for FloatRaster {
    fn from(img: &LogImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 3,
            data: img.pixels().iter().flatten().map(|&v| v as f32).collect(),
        }
    }
}

pub fn encode_upf(r: &FloatRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * r.data.len());
    out.extend_from_slice(UPF_MAGIC);
    out.extend_from_slice(&(r.width as u32).to_le_bytes());
    out.extend_from_slice(&(r.height as u32).to_le_bytes());
    out.push(r.channels);
    for v in &r.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_upf(mut bytes: &[u8]) -> Result<FloatRaster> {
    let mut head = [0u8; 13];
    bytes
        .read_exact(&mut head)
        .map_err(|_| Error::format("UPF1", "truncated header"))?;
    if &head[..4] != UPF_MAGIC {
        return Err(Error::format("UPF1", "bad magic"));
    }
    let width = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let channels = head[12];
    if width == 0 || height == 0 || channels == 0 {
        return Err(Error::format("UPF1", "zero dimension"));
    }
    let n = width * height * channels as usize;
    if bytes.len() != 4 * n {
        return Err(Error::format("UPF1", format!("expected {} data bytes, found {}", 4 * n, bytes.len())));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(FloatRaster {
        width,
        height,
        channels,
        data,
    })
}

pub fn write_upf(path: impl AsRef<Path>, r: &FloatRaster) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_upf(r))?;
    Ok(())
}

pub fn read_upf(path: impl AsRef<Path>) -> Result<FloatRaster> {
    decode_upf(&fs::read(path)?)
}
