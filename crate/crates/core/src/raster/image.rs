use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const FLOAT_MAGIC: &[u8; 4] = b"GSRF";

/// Row-major multi-channel image of `f64` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            values: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut img = Self::new(width, height, 1);
        for y in 0..height {
            for x in 0..width {
                img.values[y * width + x] = f(x, y);
            }
        }
        img
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.values[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.index(x, y, 0);
        &self.values[i..i + self.channels]
    }

    /// Single channel `c` as its own image.
    pub fn channel(&self, c: usize) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            values: self.values.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn count_nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }
}

/// Binary max filter with a square `size x size` window (`size` odd).
pub fn dilate_mask(mask: &RasterImage, size: usize) -> Result<RasterImage> {
    if size % 2 == 0 {
        return Err(Error::invalid(format!("dilation size {size} must be odd")));
    }
    let r = size / 2;
    let (w, h) = (mask.width, mask.height);
    let horizontal = RasterImage::from_fn(w, h, |x, y| {
        let lo = x.saturating_sub(r);
        let hi = (x + r).min(w - 1);
        (lo..=hi).map(|xx| mask.get(xx, y, 0)).fold(0.0, f64::max)
    });
    Ok(RasterImage::from_fn(w, h, |x, y| {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        (lo..=hi).map(|yy| horizontal.get(x, yy, 0)).fold(0.0, f64::max)
    }))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit binary PPM from a 3-channel image in `[0, 1]`.
pub fn write_ppm(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    if img.channels < 3 {
        return Err(Error::invalid("PPM needs at least 3 channels"));
    }
    let mut bytes = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    for y in 0..img.height {
        for x in 0..img.width {
            bytes.extend((0..3).map(|c| to_byte(img.get(x, y, c))));
        }
    }
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::at_path(path, e))
}

/// Reads an 8-bit binary PPM (`P6`) into a 3-channel image in `[0, 1]`.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::at_path(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated PPM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::format(format!("bad PPM header field `{s}`")));
    if fields[0] != "P6" || num(&fields[3])? != 255 {
        return Err(Error::format("only 8-bit binary PPM is supported"));
    }
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let body = bytes.get(pos..pos + 3 * w * h).ok_or_else(|| Error::format("truncated PPM body"))?;
    let mut img = RasterImage::new(w, h, 3);
    for (v, b) in img.values.iter_mut().zip(body) {
        *v = *b as f64 / 255.0;
    }
    Ok(img)
}

/// 8-bit binary PGM of channel 0.
pub fn write_pgm(path: impl AsRef<Path>, img: &RasterImage) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    for y in 0..img.height {
        for x in 0..img.width {
            bytes.push(to_byte(img.get(x, y, 0)));
        }
    }
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::at_path(path, e))
}

/// Flat `f32` raster: magic `GSRF`, then `u32` width, height, channels, then samples.
pub fn write_float_raster<W: Write>(mut w: W, img: &RasterImage) -> Result<()> {
    w.write_all(FLOAT_MAGIC)?;
    for v in [img.width, img.height, img.channels] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    let body: Vec<u8> = img.values.iter().flat_map(|v| (*v as f32).to_le_bytes()).collect();
    w.write_all(&body)?;
    Ok(())
}

pub fn read_float_raster<R: Read>(mut r: R) -> Result<RasterImage> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..4] != FLOAT_MAGIC {
        return Err(Error::format("bad float raster magic"));
    }
    let dim = |i: usize| u32::from_le_bytes(head[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (width, height, channels) = (dim(0), dim(1), dim(2));
    let mut body = vec![0u8; width * height * channels * 4];
    r.read_exact(&mut body)?;
    Ok(RasterImage {
        width,
        height,
        channels,
        values: body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    })
}
