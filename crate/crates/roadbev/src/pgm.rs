//! Binary PGM (P5, maxval 255) for ROI masks.

use std::fs;
use std::path::Path;

use roadbev_core::RoiBitmap;

use crate::error::{Error, Result};

pub fn encode(width: u32, height: u32, data: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

/// Parses a P5 image with maxval ≤ 255, returning `(width, height, pixels)`.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let bad = |m: &str| Error::format(path, format!("PGM: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<&[u8]> {
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
            return Err(bad("truncated header"));
        }
        Ok(&bytes[start..pos])
    };
    if token()? != b"P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let mut number = |what: &str| -> Result<u32> {
        std::str::from_utf8(token()?)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("bad {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let n = width as usize * height as usize;
    if bytes.len() < start + n {
        return Err(bad("truncated raster"));
    }
    Ok((width, height, bytes[start..start + n].to_vec()))
}

pub fn read_roi(path: &Path) -> Result<RoiBitmap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, data) = decode(&bytes, path)?;
    RoiBitmap::new(w, h, data).map_err(|e| Error::validation(path, "roi", e))
}

pub fn write_roi(roi: &RoiBitmap, path: &Path) -> Result<()> {
    fs::write(path, encode(roi.width(), roi.height(), roi.data())).map_err(|e| Error::io(path, e))
}
