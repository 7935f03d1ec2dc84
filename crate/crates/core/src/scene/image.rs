use std::path::Path;

use crate::error::{Error, Result};

/// Row-major RGB image with linear single-precision channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f32>,
}

impl ImageBuffer {
    /// Black image.
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuffer {
            width,
            height,
            rgb: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Self {
        let mut img = Self::new(width, height);
        img.rgb.chunks_exact_mut(3).for_each(|px| px.copy_from_slice(&value));
        img
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, v: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&v);
    }

    /// Clamps every channel into `[0, 1]`.
    pub fn finalize(&mut self) {
        for v in &mut self.rgb {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Binary P6 encoding; each channel maps to `round(clamp(v, 0, 1) * 255)`
    /// with ties to even.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.rgb.iter().map(|&v| to_byte(v)));
        out
    }

    pub fn bit_identical(&self, other: &ImageBuffer) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.rgb.iter().zip(&other.rgb).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn to_byte(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round_ties_even() as u8
}

pub fn write_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, img.to_ppm()).map_err(|e| Error::io(path, e))
}

/// Reads a binary P6 file with maxval 255 into `[0, 1]` channels (`byte / 255`).
pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut pos = 0usize;
    let mut fields = [0usize; 3];
    if bytes.get(..2) != Some(b"P6") {
        return Err(Error::byte(0, "not a binary PPM (missing P6 magic)"));
    }
    pos += 2;
    for field in &mut fields {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::byte(pos as u64, "expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::byte(start as u64, "header field out of range"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::byte(pos as u64, "missing whitespace after header"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::byte(pos as u64, format!("unsupported maxval {maxval}")));
    }
    let n = width * height * 3;
    let data = &bytes[pos..];
    if data.len() != n {
        return Err(Error::byte(
            (pos + data.len().min(n)) as u64,
            format!("expected {n} pixel bytes, found {}", data.len()),
        ));
    }
    Ok(ImageBuffer {
        width,
        height,
        rgb: data.iter().map(|&b| b as f32 / 255.0).collect(),
    })
}
