//! Binary 8-bit P5 portable graymap read/write with linear windowing, used
//! for phase/reflectance/PSF figure panels and scene ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::io::container::write_atomic;

/// Write `field` as a P5 graymap, mapping `[min, max]` linearly onto
/// `[0, 255]` with clamping.
pub fn write_raster(path: &Path, field: &RealField, min: f64, max: f64) -> Result<()> {
    if !(max > min) {
        return Err(Error::Format(format!(
            "degenerate raster window [{min}, {max}]"
        )));
    }
    let n = field.n();
    let mut content = format!("P5\n{n} {n}\n255\n").into_bytes();
    let scale = 255.0 / (max - min);
    content.extend(field.data().iter().map(|&v| {
        let t = (v - min) * scale;
        t.round().clamp(0.0, 255.0) as u8
    }));
    write_atomic(path, &content)
}

/// An 8-bit grayscale image as read from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Read a binary P5 graymap with maxval 255. Header tokens may be separated
/// by any whitespace and `#` comments.
pub fn read_raster(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    let mut pos = 0usize;

    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated graymap header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(&bytes)? != "P5" {
        return Err(Error::Format("not a binary P5 graymap".into()));
    }
    let width: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::Format("bad graymap width".into()))?;
    let height: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::Format("bad graymap height".into()))?;
    let maxval: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::Format("bad graymap maxval".into()))?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "unsupported graymap maxval {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("missing raster separator".into()));
    }
    pos += 1;
    let expected = width * height;
    let pixels = &bytes[pos..];
    if pixels.len() != expected {
        return Err(Error::Format(format!(
            "raster length mismatch: expected {expected} bytes, found {}",
            pixels.len()
        )));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: pixels.to_vec(),
    })
}
