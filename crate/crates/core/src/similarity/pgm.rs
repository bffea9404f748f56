//! Binary PGM (P5, maxval 255) reading and writing.

use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes).map_err(|reason| Error::parse(path, reason))
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    for &p in image.pixels() {
        if p.fract() != 0.0 || !(0.0..=255.0).contains(&p) {
            return Err(Error::Invalid(format!("pixel {p} is not representable in 8 bits")));
        }
        out.push(p as u8);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Header<'a> {
    rest: &'a [u8],
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        loop {
            match self.rest.first() {
                Some(c) if c.is_ascii_whitespace() => self.rest = &self.rest[1..],
                Some(b'#') => {
                    let end = self.rest.iter().position(|&c| c == b'\n').unwrap_or(self.rest.len());
                    self.rest = &self.rest[end..];
                }
                _ => return,
            }
        }
    }

    fn token(&mut self) -> std::result::Result<&'a [u8], String> {
        self.skip_space_and_comments();
        let end = self
            .rest
            .iter()
            .position(|c| c.is_ascii_whitespace() || *c == b'#')
            .unwrap_or(self.rest.len());
        if end == 0 {
            return Err("truncated header".into());
        }
        let (tok, rest) = self.rest.split_at(end);
        self.rest = rest;
        Ok(tok)
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("invalid {what} in header"))
    }
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut header = Header { rest: bytes };
    if header.token()? != b"P5" {
        return Err("not a binary PGM (expected magic P5)".into());
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(format!("only maxval 255 is supported, got {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    match header.rest.split_first() {
        Some((c, raster)) if c.is_ascii_whitespace() => {
            let n = width * height;
            if raster.len() != n {
                return Err(format!("expected {n} raster bytes, found {}", raster.len()));
            }
            GrayImage::from_u8(width, height, raster).map_err(|e| e.to_string())
        }
        _ => Err("missing whitespace after maxval".into()),
    }
}
