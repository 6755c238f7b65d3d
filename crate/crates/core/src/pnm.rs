//! Minimal netpbm reader/writer: PPM (P3/P6) colour images and PGM (P2/P5)
//! label masks, maxval 255.

use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, three bytes per pixel.
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        RgbImage {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Binary P6 encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pnm(bytes: &[u8]) -> Result<Self> {
        let (magic, width, height, data) = decode(bytes)?;
        match magic {
            Magic::P3 | Magic::P6 => Ok(RgbImage {
                width,
                height,
                data,
            }),
            _ => Err(Error::Pnm("expected a P3 or P6 colour image".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pnm(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn put(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Binary P5 encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pnm(bytes: &[u8]) -> Result<Self> {
        let (magic, width, height, data) = decode(bytes)?;
        match magic {
            Magic::P2 | Magic::P5 => Ok(GrayImage {
                width,
                height,
                data,
            }),
            _ => Err(Error::Pnm("expected a P2 or P5 grey map".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pnm(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Magic {
    P2,
    P3,
    P5,
    P6,
}

impl Magic {
    fn channels(self) -> usize {
        match self {
            Magic::P2 | Magic::P5 => 1,
            Magic::P3 | Magic::P6 => 3,
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pnm("unexpected end of header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Pnm("non-ascii header".into()))
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| Error::Pnm(format!("expected a number, found {tok:?}")))
    }
}

fn decode(bytes: &[u8]) -> Result<(Magic, usize, usize, Vec<u8>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = match cur.token()? {
        "P2" => Magic::P2,
        "P3" => Magic::P3,
        "P5" => Magic::P5,
        "P6" => Magic::P6,
        other => return Err(Error::Pnm(format!("unsupported magic {other:?}"))),
    };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(Error::Pnm(format!("maxval {maxval} unsupported, expected 255")));
    }
    let n = width * height * magic.channels();
    let data = match magic {
        Magic::P5 | Magic::P6 => {
            // exactly one whitespace byte separates the header from the raster
            let start = cur.pos + 1;
            if bytes.len() < start + n {
                return Err(Error::Pnm(format!(
                    "raster truncated: need {n} bytes, have {}",
                    bytes.len().saturating_sub(start)
                )));
            }
            bytes[start..start + n].to_vec()
        }
        Magic::P2 | Magic::P3 => {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let v = cur.number()?;
                if v > 255 {
                    return Err(Error::Pnm(format!("sample {v} exceeds maxval")));
                }
                data.push(v as u8);
            }
            data
        }
    };
    Ok((magic, width, height, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_ppm_with_comment() {
        let src = b"P3\n# a comment\n2 1\n255\n255 0 0  0 255 0\n";
        let img = RgbImage::from_pnm(src).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        assert_eq!(img.get(0, 0), [255, 0, 0]);
        assert_eq!(img.get(1, 0), [0, 255, 0]);
    }

    #[test]
    fn binary_roundtrip() {
        let mut img = RgbImage::new(3, 2, [1, 2, 3]);
        img.put(2, 1, [10, 20, 30]);
        assert_eq!(RgbImage::from_pnm(&img.to_ppm()).unwrap(), img);

        let mut mask = GrayImage::new(4, 3);
        mask.put(1, 2, 7);
        assert_eq!(GrayImage::from_pnm(&mask.to_pgm()).unwrap(), mask);
    }

    #[test]
    fn ascii_pgm() {
        let m = GrayImage::from_pnm(b"P2 2 2 255 0 1\n2 3").unwrap();
        assert_eq!(m.data, vec![0, 1, 2, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RgbImage::from_pnm(b"P6\n2 2\n65535\n").is_err());
        assert!(RgbImage::from_pnm(b"P6\n2 2\n255\n\x00").is_err());
        assert!(RgbImage::from_pnm(b"P5\n1 1\n255\n\x00").is_err());
        assert!(GrayImage::from_pnm(b"P1\n1 1\n1").is_err());
    }
}
