use std::fs;
use std::path::Path;

use super::ImageGray;
use crate::error::{Error, Result};

const MAXVAL: u32 = 255;

/// PGM flavor to write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PgmFormat {
    /// `P2`
    Ascii,
    /// `P5`
    #[default]
    Binary,
}

fn format_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Format {
        offset,
        msg: msg.into(),
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.bytes.get(self.pos) {
                None => format_err(start, format!("unexpected end of data, expected {what}")),
                Some(_) => format_err(start, format!("expected {what}")),
            };
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| format_err(start, format!("{what} is out of range")), Ok)
    }
}

/// Decodes a `P2` or `P5` image with maxval 255; pixels are scaled by 1/255.
pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGray> {
    let binary = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return format_err(0, "expected magic number P2 or P5"),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return format_err(2, "expected whitespace after magic number");
    }
    cur.skip_space();
    let width_at = cur.pos;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    if width == 0 || height == 0 {
        return format_err(width_at, "image dimensions must be positive");
    }
    if width != height {
        return format_err(
            width_at,
            format!("image is {width}x{height}; only square images are supported"),
        );
    }
    cur.skip_space();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != MAXVAL {
        return format_err(maxval_at, format!("maxval must be 255, got {maxval}"));
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        match cur.bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return format_err(cur.pos, "expected a single whitespace before raster"),
            None => return format_err(cur.pos, "truncated payload: missing raster"),
        }
        let raster = &bytes[cur.pos..];
        if raster.len() < n {
            return format_err(
                bytes.len(),
                format!("truncated payload: expected {n} pixels, found {}", raster.len()),
            );
        }
        pixels.extend(raster[..n].iter().map(|&b| f64::from(b) / 255.0));
    } else {
        for _ in 0..n {
            cur.skip_space();
            let at = cur.pos;
            let v = cur.number("pixel value").map_err(|e| match e {
                Error::Format { offset, msg } if offset >= bytes.len() => Error::Format {
                    offset,
                    msg: format!("truncated payload: {msg}"),
                },
                other => other,
            })?;
            if v > MAXVAL {
                return format_err(at, format!("pixel value {v} exceeds maxval"));
            }
            pixels.push(f64::from(v) / 255.0);
        }
    }
    ImageGray::new(width, pixels)
}

/// `⌊255·p + ½⌋` after clamping to `[0, 1]`.
pub(crate) fn quantize(p: f64) -> u8 {
    (255.0 * p.clamp(0.0, 1.0) + 0.5).floor() as u8
}

pub fn encode_pgm(img: &ImageGray, format: PgmFormat) -> Vec<u8> {
    let side = img.side();
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    let mut out = format!("{magic}\n{side} {side}\n{MAXVAL}\n").into_bytes();
    match format {
        PgmFormat::Binary => out.extend(img.pixels().iter().map(|&p| quantize(p))),
        PgmFormat::Ascii => {
            for row in img.pixels().chunks(side) {
                let line: Vec<String> = row.iter().map(|&p| quantize(p).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageGray> {
    decode_pgm(&fs::read(path)?)
}

pub fn save_pgm(img: &ImageGray, path: impl AsRef<Path>, format: PgmFormat) -> Result<()> {
    fs::write(path, encode_pgm(img, format))?;
    Ok(())
}
