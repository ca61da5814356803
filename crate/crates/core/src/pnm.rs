//! Minimal binary Netpbm readers and writers (P5 grey, P6 colour).

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a {expected} file (magic {found:?})")]
    BadMagic {
        expected: &'static str,
        found: String,
    },
    #[error("malformed header at byte {offset}")]
    BadHeader { offset: usize },
    #[error("unexpected end of file at byte {offset}")]
    Truncated { offset: usize },
    #[error("unsupported maxval {0}")]
    Maxval(u32),
}

/// 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }

    pub fn read_ppm<R: Read>(r: R) -> Result<Self, PnmError> {
        let (magic, width, height, maxval, body) = read_pnm(r)?;
        if magic != "P6" {
            return Err(PnmError::BadMagic {
                expected: "P6",
                found: magic,
            });
        }
        if maxval != 255 {
            return Err(PnmError::Maxval(maxval));
        }
        let need = width as usize * height as usize * 3;
        if body.len() < need {
            return Err(PnmError::Truncated { offset: body.len() });
        }
        Ok(Self {
            width,
            height,
            data: body[..need].to_vec(),
        })
    }
}

/// Greyscale raster with either 8- or 16-bit samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl GrayImage {
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n{}\n", self.width, self.height, self.maxval)?;
        if self.maxval < 256 {
            let bytes: Vec<u8> = self.data.iter().map(|v| *v as u8).collect();
            w.write_all(&bytes)
        } else {
            // Netpbm stores 16-bit samples big-endian.
            let mut bytes = Vec::with_capacity(self.data.len() * 2);
            for v in &self.data {
                bytes.extend_from_slice(&v.to_be_bytes());
            }
            w.write_all(&bytes)
        }
    }

    pub fn read_pgm<R: Read>(r: R) -> Result<Self, PnmError> {
        let (magic, width, height, maxval, body) = read_pnm(r)?;
        if magic != "P5" {
            return Err(PnmError::BadMagic {
                expected: "P5",
                found: magic,
            });
        }
        if maxval == 0 || maxval > 65535 {
            return Err(PnmError::Maxval(maxval));
        }
        let n = width as usize * height as usize;
        let data = if maxval < 256 {
            if body.len() < n {
                return Err(PnmError::Truncated { offset: body.len() });
            }
            body[..n].iter().map(|b| *b as u16).collect()
        } else {
            if body.len() < 2 * n {
                return Err(PnmError::Truncated { offset: body.len() });
            }
            body[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        Ok(Self {
            width,
            height,
            maxval: maxval as u16,
            data,
        })
    }
}

fn read_pnm<R: Read>(mut r: R) -> Result<(String, u32, u32, u32, Vec<u8>), PnmError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut fields: Vec<String> = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PnmError::Truncated { offset: pos });
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() {
        return Err(PnmError::Truncated { offset: pos });
    }
    pos += 1;
    let magic = fields[0].clone();
    if magic != "P5" && magic != "P6" {
        return Err(PnmError::BadMagic {
            expected: "P5/P6",
            found: magic,
        });
    }
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| PnmError::BadHeader { offset: 0 })
    };
    let width = parse(&fields[1])?;
    let height = parse(&fields[2])?;
    let maxval = parse(&fields[3])?;
    Ok((magic, width, height, maxval, bytes[pos..].to_vec()))
}
