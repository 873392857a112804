//! Netpbm graymap reader/writer (P2 ASCII and P5 binary, maxval <= 65535).
//! Pixels are held as `f64` in `[0, 1]`, i.e. divided by maxval.

use std::path::Path;

use crate::error::{HcdError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    /// Row-major pixels, each in `[0, 1]`.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(HcdError::Pgm("image dimensions must be positive".into()));
        }
        if pixels.len() != width * height {
            return Err(HcdError::DimensionMismatch {
                context: "image pixels",
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(HcdError::Pgm("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let binary = match cur.token()? {
            b"P2" => false,
            b"P5" => true,
            other => {
                return Err(HcdError::Pgm(format!(
                    "unsupported magic {:?}",
                    String::from_utf8_lossy(other)
                )))
            }
        };
        let width = cur.number()?;
        let height = cur.number()?;
        let maxval = cur.number()?;
        if !(1..=65535).contains(&maxval) {
            return Err(HcdError::Pgm(format!("maxval {maxval} out of range")));
        }
        let n = width * height;
        let mut raw = Vec::with_capacity(n);
        if binary {
            // exactly one whitespace byte separates the header from the raster
            cur.pos += 1;
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            let data = bytes
                .get(cur.pos..cur.pos + need)
                .ok_or_else(|| HcdError::Pgm("truncated raster".into()))?;
            if wide {
                raw.extend(data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize));
            } else {
                raw.extend(data.iter().map(|&b| b as usize));
            }
        } else {
            for _ in 0..n {
                raw.push(cur.number()?);
            }
        }
        if raw.iter().any(|&v| v > maxval) {
            return Err(HcdError::Pgm("sample exceeds maxval".into()));
        }
        let scale = maxval as f64;
        Self::new(width, height, raw.into_iter().map(|v| v as f64 / scale).collect())
    }

    /// Quantizes to `maxval` levels and encodes as P5 (`binary`) or P2.
    pub fn encode(&self, maxval: u16, binary: bool) -> Result<Vec<u8>> {
        if maxval == 0 {
            return Err(HcdError::Pgm("maxval must be positive".into()));
        }
        let q: Vec<u16> = self
            .pixels
            .iter()
            .map(|p| (p * maxval as f64).round() as u16)
            .collect();
        let mut out = format!(
            "{}\n{} {}\n{}\n",
            if binary { "P5" } else { "P2" },
            self.width,
            self.height,
            maxval
        )
        .into_bytes();
        if binary {
            for v in q {
                if maxval > 255 {
                    out.extend_from_slice(&v.to_be_bytes());
                } else {
                    out.push(v as u8);
                }
            }
        } else {
            for row in q.chunks(self.width) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        Ok(out)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn token(&mut self) -> Result<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(HcdError::Pgm("unexpected end of file".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| HcdError::Pgm(format!("expected integer, got {:?}", String::from_utf8_lossy(t))))
    }
}
