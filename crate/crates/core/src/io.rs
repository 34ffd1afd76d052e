//! Raw float32 files with a text sidecar, and 16-bit PGM previews.
//!
//! A raw file holds little-endian `f32` samples row-major. Its sidecar lives
//! next to it with `.hdr` appended and carries `width=`/`height=` for images
//! or `angles=`/`cells=` for sinograms, one key per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Geometry, ImageGrid, Result, Sinogram};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn encode_f32(data: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for &v in data {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    bytes
}

fn decode_f32(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn header_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    map.get(key)
        .ok_or_else(|| Error::Parse(format!("header is missing `{key}`")))?
        .parse()
        .map_err(|e| Error::Parse(format!("header `{key}`: {e}")))
}

pub fn write_image_raw(path: &Path, img: &ImageGrid) -> Result<()> {
    fs::write(path, encode_f32(img.data())).map_err(io_err(path))?;
    let hdr = sidecar_path(path);
    fs::write(&hdr, format!("width={}\nheight={}\n", img.width(), img.height())).map_err(io_err(&hdr))
}

pub fn read_image_raw(path: &Path) -> Result<ImageGrid> {
    let hdr = sidecar_path(path);
    let map = parse_key_values(&fs::read_to_string(&hdr).map_err(io_err(&hdr))?)?;
    let (w, h) = (header_usize(&map, "width")?, header_usize(&map, "height")?);
    let data = decode_f32(&fs::read(path).map_err(io_err(path))?);
    ImageGrid::from_vec(w, h, data)
}

pub fn write_sinogram_raw(path: &Path, sino: &Sinogram) -> Result<()> {
    fs::write(path, encode_f32(sino.data())).map_err(io_err(path))?;
    let g = sino.geometry();
    let hdr = sidecar_path(path);
    fs::write(&hdr, format!("angles={}\ncells={}\n", g.num_angles(), g.num_cells())).map_err(io_err(&hdr))
}

pub fn read_sinogram_raw(path: &Path) -> Result<Sinogram> {
    let hdr = sidecar_path(path);
    let map = parse_key_values(&fs::read_to_string(&hdr).map_err(io_err(&hdr))?)?;
    let g = Geometry::new(header_usize(&map, "angles")?, header_usize(&map, "cells")?)?;
    let data = decode_f32(&fs::read(path).map_err(io_err(path))?);
    Sinogram::from_vec(&g, data)
}

/// Binary 16-bit PGM (big-endian samples), min-max normalized to `0..=65535`.
pub fn pgm16_bytes(width: usize, height: usize, data: &[f64]) -> Vec<u8> {
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in data {
        let q = (((v - lo) / span) * 65535.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn write_image_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    fs::write(path, pgm16_bytes(img.width(), img.height(), img.data())).map_err(io_err(path))
}

pub fn write_sinogram_pgm(path: &Path, sino: &Sinogram) -> Result<()> {
    let g = sino.geometry();
    fs::write(path, pgm16_bytes(g.num_cells(), g.num_angles(), sino.data())).map_err(io_err(path))
}
