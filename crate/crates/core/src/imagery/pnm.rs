//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.
//!
//! Writers always emit the canonical header `P<n>\n<w> <h>\n255\n`, so a
//! canonical file survives a read/write cycle byte for byte.

use std::path::Path;

use crate::error::{Error, Result};

use super::RasterImage;

pub fn encode(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.data());
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl Header<'_> {
    fn line(&self) -> usize {
        1 + self.bytes[..self.pos].iter().filter(|&&b| b == b'\n').count()
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.name, self.line(), message)
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} out of range")))
    }
}

/// Decodes a binary PGM/PPM. `name` labels errors.
pub fn decode(bytes: &[u8], name: &str) -> Result<RasterImage> {
    let mut h = Header { bytes, pos: 0, name };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(h.err("not a binary PGM (P5) or PPM (P6) file")),
    };
    h.pos = 2;
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(h.err(format!("only maxval 255 is supported, found {maxval}")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(h.err("expected a single whitespace byte after maxval")),
    }
    if width == 0 || height == 0 {
        return Err(h.err("image dimensions must be positive"));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| h.err("image dimensions overflow"))?;
    let data = &bytes[h.pos..];
    if data.len() != expected {
        return Err(h.err(format!(
            "expected {expected} bytes of pixel data, found {}",
            data.len()
        )));
    }
    RasterImage::new(width, height, channels, data.to_vec())
}

pub fn read(path: &Path) -> Result<RasterImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}

pub fn write(img: &RasterImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
