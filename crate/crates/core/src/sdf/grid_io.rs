//! `SDFGRID` files: one ASCII header line
//! `SDFGRID nx ny nz xmin ymin zmin xmax ymax zmax`, then `nx*ny*nz`
//! little-endian `f32` node values, x fastest.

use std::path::Path;

use super::family::GridSpec;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub fn encode_grid(spec: &GridSpec, values: &[f64]) -> Vec<u8> {
    let [nx, ny, nz] = spec.dims;
    let (a, b) = (spec.min, spec.max);
    let mut out = format!(
        "SDFGRID {nx} {ny} {nz} {} {} {} {} {} {}\n",
        a.x, a.y, a.z, b.x, b.y, b.z
    )
    .into_bytes();
    out.reserve(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<(GridSpec, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("SDFGRID header line missing".into()))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::Format("SDFGRID header is not UTF-8".into()))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("SDFGRID") {
        return Err(Error::Format("bad magic, expected SDFGRID".into()));
    }
    let rest: Vec<&str> = fields.collect();
    if rest.len() != 9 {
        return Err(Error::Format(format!(
            "SDFGRID header needs 9 fields, found {}",
            rest.len()
        )));
    }
    let mut dims = [0usize; 3];
    for (d, s) in dims.iter_mut().zip(&rest[..3]) {
        *d = s
            .parse()
            .map_err(|_| Error::Format(format!("bad grid dimension {s:?}")))?;
    }
    let mut box_ = [0.0f64; 6];
    for (v, s) in box_.iter_mut().zip(&rest[3..]) {
        *v = s
            .parse()
            .map_err(|_| Error::Format(format!("bad grid bound {s:?}")))?;
    }
    let spec = GridSpec {
        dims,
        min: Vec3::new(box_[0], box_[1], box_[2]),
        max: Vec3::new(box_[3], box_[4], box_[5]),
    };
    let n = dims[0]
        .checked_mul(dims[1])
        .and_then(|v| v.checked_mul(dims[2]))
        .ok_or_else(|| Error::Format("grid dimensions overflow".into()))?;
    let payload = &bytes[nl + 1..];
    if payload.len() != n * 4 {
        return Err(Error::Format(format!(
            "SDFGRID payload has {} bytes, expected {}",
            payload.len(),
            n * 4
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((spec, values))
}

pub fn read_grid(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&bytes)
}

pub fn write_grid(path: &Path, spec: &GridSpec, values: &[f64]) -> Result<()> {
    std::fs::write(path, encode_grid(spec, values)).map_err(|e| Error::io(path, e))
}
