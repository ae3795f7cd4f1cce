//! SDF files and scene documents.
//!
//! Binary layout, little-endian: `origin` (3 × f64), `cell_size` (f64),
//! `dims` (3 × u64), then `nx · ny · nz` f64 values in row-major order.
//! The JSON form carries the same fields: `{origin, cell_size, dims, data}`.

use super::{Scene, SdfGrid};
use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::io::{Read, Write};
use std::path::Path;

const HEADER_BYTES: usize = 8 * 7;

pub fn write_sdf_binary(sdf: &SdfGrid, mut w: impl Write) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(HEADER_BYTES + 8 * sdf.data.len());
    for v in sdf.origin.iter().chain(std::iter::once(&sdf.cell_size)) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &d in &sdf.dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in &sdf.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_sdf_binary(mut r: impl Read) -> Result<SdfGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Sdf(e.to_string()))?;
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Sdf(format!("file has {} bytes, header needs {HEADER_BYTES}", bytes.len())));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().expect("8 bytes") };
    let f = |i: usize| f64::from_le_bytes(word(i));
    let origin = Vector3::new(f(0), f(1), f(2));
    let cell_size = f(3);
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        *d = usize::try_from(u64::from_le_bytes(word(4 + a))).map_err(|_| Error::Sdf("grid dims overflow".into()))?;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Sdf("grid dims overflow".into()))?;
    let body = &bytes[HEADER_BYTES..];
    if body.len() != 8 * n {
        return Err(Error::Sdf(format!("expected {n} values, file holds {} bytes of data", body.len())));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    SdfGrid::new(origin, cell_size, dims, data)
}

pub fn write_sdf_json(sdf: &SdfGrid, w: impl Write) -> std::io::Result<()> {
    serde_json::to_writer(w, sdf).map_err(std::io::Error::other)
}

pub fn read_sdf_json(r: impl Read) -> Result<SdfGrid> {
    let raw: SdfGrid = serde_json::from_reader(r).map_err(|e| Error::Sdf(e.to_string()))?;
    SdfGrid::new(raw.origin, raw.cell_size, raw.dims, raw.data)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Writes JSON for `.json` paths and the binary layout otherwise.
pub fn save_sdf(sdf: &SdfGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let w = std::io::BufWriter::new(file);
    let res = if is_json(path) { write_sdf_json(sdf, w) } else { write_sdf_binary(sdf, w) };
    res.map_err(|e| Error::io(path, e))
}

pub fn load_sdf(path: impl AsRef<Path>) -> Result<SdfGrid> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let r = std::io::BufReader::new(file);
    let res = if is_json(path) { read_sdf_json(r) } else { read_sdf_binary(r) };
    res.map_err(|e| match e {
        Error::Sdf(m) => Error::Sdf(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Reads a TOML scene document (`[grid]` plus `[obstacles]`).
pub fn load_scene_file(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let scene: Scene = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    scene.grid.validate()?;
    scene.obstacles.validate()?;
    Ok(scene)
}
