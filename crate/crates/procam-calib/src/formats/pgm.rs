//! Binary PGM (P5, 8-bit) reader and writer for pattern and capture frames.

use std::io::Write;
use std::path::Path;

use super::FormatError;
use crate::structured_light::GrayImage;

/// Upper bound on accepted dimensions; beyond this a header is treated as
/// corrupt rather than allocating gigabytes.
const MAX_DIMENSION: u64 = 1 << 15;

/// Serializes an image as binary PGM with maxval 255.
pub fn write_pgm(out: &mut impl Write, img: &GrayImage) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.write_all(img.data())
}

pub fn write_pgm_file(path: impl AsRef<Path>, img: &GrayImage) -> Result<(), FormatError> {
    let mut buf = Vec::with_capacity(img.data().len() + 32);
    write_pgm(&mut buf, img).map_err(|e| FormatError::io(&path, e))?;
    super::write_bytes(path, &buf)
}

pub fn read_pgm_file(path: impl AsRef<Path>) -> Result<GrayImage, FormatError> {
    let bytes = super::read_bytes(&path)?;
    parse_pgm(&bytes).map_err(|e| e.with_path(path))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos > start {
            Some(&self.bytes[start..self.pos])
        } else {
            None
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, FormatError> {
        let tok = self
            .token()
            .ok_or_else(|| FormatError::schema(format!("PGM header truncated before {what}")))?;
        let s = std::str::from_utf8(tok)
            .map_err(|_| FormatError::schema(format!("PGM {what} is not ASCII")))?;
        s.parse::<u64>()
            .map_err(|_| FormatError::schema(format!("PGM {what} is not a number: {s:?}")))
    }
}

/// Parses a binary PGM (P5) buffer. Accepts `#` comments in the header and
/// requires maxval <= 255 and an exact-length 8-bit payload.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur
        .token()
        .ok_or_else(|| FormatError::schema("empty PGM buffer"))?;
    if magic != b"P5" {
        return Err(FormatError::schema(format!(
            "expected P5 magic, got {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || width > MAX_DIMENSION || height > MAX_DIMENSION {
        return Err(FormatError::schema(format!(
            "unreasonable PGM dimensions {width}x{height}"
        )));
    }
    if !(1..=255).contains(&maxval) {
        return Err(FormatError::schema(format!(
            "only 8-bit PGM supported (maxval 1..=255), got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(FormatError::schema("missing separator before PGM raster"));
    }
    cur.pos += 1;
    let expected = (width * height) as usize;
    let raster = &bytes[cur.pos..];
    if raster.len() != expected {
        return Err(FormatError::schema(format!(
            "PGM raster has {} bytes, expected {expected}",
            raster.len()
        )));
    }
    GrayImage::new(width as u32, height as u32, raster.to_vec())
        .map_err(|e| FormatError::schema(e.to_string()))
}
