//! Binary PGM (P5) and PPM (P6) images.

use std::io::Write;

use crate::error::{Error, Result};

/// Row-major image with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image<T> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Copy + Default> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![T::default(); width * height * channels] }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for v in 0..height {
            for u in 0..width {
                for c in 0..channels {
                    data.push(f(u, v, c));
                }
            }
        }
        Self { width, height, channels, data }
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize, c: usize) -> T {
        self.data[(v * self.width + u) * self.channels + c]
    }

    pub fn same_size<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Parses the `magic width height maxval` header; returns the fields and the raster offset.
fn parse_header(bytes: &[u8], magic: &[u8; 2], path: &str) -> Result<(usize, usize, u32, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::parse(path, 1, format!("expected magic {}", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut line = 1;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => {
                    if *b == b'\n' {
                        line += 1;
                    }
                    pos += 1;
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, line, "malformed image header"))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::parse(path, line, "image header must end with one whitespace byte")),
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(path, line, format!("maxval {maxval} outside 1..=65535")));
    }
    Ok((w as usize, h as usize, maxval as u32, pos))
}

fn read_samples(bytes: &[u8], offset: usize, n: usize, maxval: u32, path: &str) -> Result<Vec<u16>> {
    let wide = maxval > 255;
    let size = if wide { 2 } else { 1 };
    let raster = &bytes[offset..];
    if raster.len() != n * size {
        return Err(Error::parse(
            path,
            0,
            format!("raster holds {} bytes, expected {}", raster.len(), n * size),
        ));
    }
    Ok(if wide {
        raster.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    })
}

/// Reads a P5 image; 8-bit samples are widened to `u16` unchanged.
pub fn parse_pgm(bytes: &[u8], path: &str) -> Result<Image<u16>> {
    let (width, height, maxval, offset) = parse_header(bytes, b"P5", path)?;
    let data = read_samples(bytes, offset, width * height, maxval, path)?;
    Ok(Image { width, height, channels: 1, data })
}

/// Reads a P6 image; 16-bit samples are rescaled to 8 bits.
pub fn parse_ppm(bytes: &[u8], path: &str) -> Result<Image<u8>> {
    let (width, height, maxval, offset) = parse_header(bytes, b"P6", path)?;
    let data = read_samples(bytes, offset, width * height * 3, maxval, path)?
        .into_iter()
        .map(|v| ((v as u32 * 255 + maxval / 2) / maxval) as u8)
        .collect();
    Ok(Image { width, height, channels: 3, data })
}

/// Writes a 16-bit P5 image.
pub fn write_pgm16<W: Write>(img: &Image<u16>, out: &mut W) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
    for v in &img.data {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io("<pgm>", e))
}

/// Writes an 8-bit P6 image.
pub fn write_ppm<W: Write>(img: &Image<u8>, out: &mut W) -> Result<()> {
    let mut buf = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    buf.extend_from_slice(&img.data);
    out.write_all(&buf).map_err(|e| Error::io("<ppm>", e))
}
