//! Binary PGM (`P5`, maxval 255) masks and grayscale PFM (`Pf`) depth maps.

use std::path::Path;

use crate::error::{Error, Result};
use crate::render::SoftImage;

/// Stand-in for an infinite depth (a hole or a miss) inside PFM files.
pub const DEPTH_SENTINEL: f32 = 1e30;

/// Writes `image` thresholded at 0.5; unsampled pixels are written as 0.
pub fn encode_pgm(image: &SoftImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(
        image
            .values
            .iter()
            .zip(&image.sampled)
            .map(|(&v, &s)| if s && v >= 0.5 { 255u8 } else { 0u8 }),
    );
    out
}

/// Reads a mask; bytes at or above 128 are set.
pub fn decode_pgm(bytes: &[u8]) -> Result<SoftImage> {
    let mut cur = Header::new(bytes);
    if cur.token()? != "P5" {
        return Err(Error::Format("bad magic, expected P5".into()));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval must be 255, found {maxval}")));
    }
    let start = cur.payload_start()?;
    let n = width * height;
    let payload = &bytes[start..];
    if payload.len() < n {
        return Err(Error::Format(format!(
            "truncated payload: {} of {n} pixels",
            payload.len()
        )));
    }
    let bits: Vec<bool> = payload[..n].iter().map(|&b| b >= 128).collect();
    Ok(SoftImage::from_binary(width, height, &bits))
}

/// Row-major top-to-bottom `depth`; non-finite values become the sentinel.
pub fn encode_pfm(width: usize, height: usize, depth: &[f64]) -> Result<Vec<u8>> {
    if depth.len() != width * height {
        return Err(Error::Invalid(format!(
            "depth has {} values for a {width}x{height} image",
            depth.len()
        )));
    }
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(depth.len() * 4);
    // PFM rows run bottom to top
    for j in (0..height).rev() {
        for &d in &depth[j * width..(j + 1) * width] {
            let v = if d.is_finite() && (d as f32) < DEPTH_SENTINEL { d as f32 } else { DEPTH_SENTINEL };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns `(width, height, depth)` with the sentinel mapped back to +inf.
pub fn decode_pfm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let mut cur = Header::new(bytes);
    match cur.token()? {
        "Pf" => {}
        "PF" => return Err(Error::Format("color PFM (PF) not supported, expected Pf".into())),
        m => return Err(Error::Format(format!("bad magic {m:?}, expected Pf"))),
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let scale: f64 = cur
        .token()?
        .parse()
        .map_err(|_| Error::Format("PFM scale is not a number".into()))?;
    if !(scale < 0.0) {
        return Err(Error::Format(format!(
            "PFM scale {scale} marks big-endian data; only little-endian (negative scale) is accepted"
        )));
    }
    let start = cur.payload_start()?;
    let n = width * height;
    let payload = &bytes[start..];
    if payload.len() < 4 * n {
        return Err(Error::Format(format!(
            "truncated payload: {} of {} bytes",
            payload.len(),
            4 * n
        )));
    }
    let mut depth = vec![0.0; n];
    for (r, row) in payload[..4 * n].chunks_exact(4 * width.max(1)).enumerate() {
        let j = height - 1 - r;
        for (i, b) in row.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
            depth[j * width + i] = if v >= DEPTH_SENTINEL || !v.is_finite() { f64::INFINITY } else { v as f64 };
        }
    }
    Ok((width, height, depth))
}

pub fn read_pgm(path: &Path) -> Result<SoftImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_pgm(path: &Path, image: &SoftImage) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_pfm(path: &Path, width: usize, height: usize, depth: &[f64]) -> Result<()> {
    std::fs::write(path, encode_pfm(width, height, depth)?).map_err(|e| Error::io(path, e))
}

/// Whitespace-separated ASCII header tokens (with `#` comments), as shared
/// by the netpbm family.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Header { bytes, pos: 0 }
    }

    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos || self.pos - start > 32 {
            return Err(Error::Format("truncated or malformed header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Format("header is not ASCII".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::Format(format!("{what} {t:?} is not a non-negative integer")))
    }

    /// Exactly one whitespace byte separates the header from the payload.
    fn payload_start(&self) -> Result<usize> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            Ok(self.pos + 1)
        } else {
            Err(Error::Format("truncated header".into()))
        }
    }
}
