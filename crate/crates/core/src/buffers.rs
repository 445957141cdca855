//! Image buffers plus the PNG, `HWSD` (depth/alpha) and `HWSN` (normal) file formats.
//!
//! `HWSD`/`HWSN` layout: 16-byte header = 4-byte magic, `u32` height, `u32`
//! width, `u32` channel count (1 for `HWSD`, 3 for `HWSN`), followed by
//! `H*W*C` little-endian `f32` values, row-major, channels interleaved.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved `f64` image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuf {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageBuf {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, c: usize) -> &mut f64 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &ImageBuf) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_shape(&self, other: &ImageBuf, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Box-filter downscale by an integer factor.
    pub fn downscale(&self, factor: usize) -> ImageBuf {
        if factor <= 1 {
            return self.clone();
        }
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        let mut out = ImageBuf::new(w, h, self.channels);
        let norm = 1.0 / (factor * factor) as f64;
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    let mut acc = 0.0;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            let sx = (x * factor + dx).min(self.width - 1);
                            let sy = (y * factor + dy).min(self.height - 1);
                            acc += self.at(sx, sy, c);
                        }
                    }
                    *out.at_mut(x, y, c) = acc * norm;
                }
            }
        }
        out
    }
}

/// Per-pixel validity. `true` = pixel participates in losses and metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn all_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn none_valid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub(crate) fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs image {width}x{height}",
                self.width, self.height
            )))
        }
    }

    /// A downscaled pixel is valid only if all of its `factor x factor`
    /// source pixels are.
    pub fn downscale(&self, factor: usize) -> Mask {
        if factor <= 1 {
            return self.clone();
        }
        let w = (self.width / factor).max(1);
        let h = (self.height / factor).max(1);
        let mut data = vec![true; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut ok = true;
                for dy in 0..factor {
                    for dx in 0..factor {
                        let sx = (x * factor + dx).min(self.width - 1);
                        let sy = (y * factor + dy).min(self.height - 1);
                        ok &= self.get(sx, sy);
                    }
                }
                data[y * w + x] = ok;
            }
        }
        Mask {
            width: w,
            height: h,
            data,
        }
    }
}

pub fn read_png_rgb(path: &Path) -> Result<ImageBuf> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.as_raw().iter().map(|v| *v as f64 / 255.0).collect();
    ImageBuf::from_vec(w as usize, h as usize, 3, data)
}

pub fn to_rgb8(img: &ImageBuf) -> Result<image::RgbImage> {
    if img.channels != 3 {
        return Err(Error::ShapeMismatch(format!("expected 3 channels, got {}", img.channels)));
    }
    let raw = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .ok_or_else(|| Error::ShapeMismatch("rgb buffer".into()))
}

pub fn write_png_rgb(path: &Path, img: &ImageBuf) -> Result<()> {
    to_rgb8(img)?.save(path)?;
    Ok(())
}

/// 16-bit grayscale PNG (used for instance-id masks).
pub fn write_png_gray16(path: &Path, width: usize, height: usize, values: &[u16]) -> Result<()> {
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
        width as u32,
        height as u32,
        values.to_vec(),
    )
    .ok_or_else(|| Error::ShapeMismatch("gray16 buffer".into()))?;
    buf.save(path)?;
    Ok(())
}

pub fn read_png_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

/// Reads a dynamic-object mask PNG (8 or 16 bit): nonzero pixels are
/// dynamic, hence invalid.
pub fn read_dynamic_mask(path: &Path) -> Result<Mask> {
    // 16-bit read so that small instance ids do not round to zero
    let img = image::open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    Ok(Mask {
        width: w as usize,
        height: h as usize,
        data: img.as_raw().iter().map(|v| *v == 0).collect(),
    })
}

const DEPTH_MAGIC: &[u8; 4] = b"HWSD";
const NORMAL_MAGIC: &[u8; 4] = b"HWSN";

fn encode_float_image(magic: &[u8; 4], img: &ImageBuf) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(img.height as u32).to_le_bytes());
    out.extend_from_slice(&(img.width as u32).to_le_bytes());
    out.extend_from_slice(&(img.channels as u32).to_le_bytes());
    for v in &img.data {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn decode_float_image(magic: &[u8; 4], channels: usize, bytes: &[u8]) -> Result<ImageBuf> {
    if bytes.len() < 16 {
        return Err(Error::UnexpectedEof);
    }
    if &bytes[0..4] != magic {
        return Err(Error::Format(format!(
            "expected {} header",
            String::from_utf8_lossy(magic)
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (h, w, c) = (word(4), word(8), word(12));
    if c != channels {
        return Err(Error::Format(format!("expected {channels} channels, found {c}")));
    }
    let n = h * w * c;
    if bytes.len() < 16 + n * 4 {
        return Err(Error::UnexpectedEof);
    }
    let data = bytes[16..16 + n * 4]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    ImageBuf::from_vec(w, h, c, data)
}

pub fn encode_depth(img: &ImageBuf) -> Result<Vec<u8>> {
    if img.channels != 1 {
        return Err(Error::ShapeMismatch("depth maps have one channel".into()));
    }
    Ok(encode_float_image(DEPTH_MAGIC, img))
}

pub fn decode_depth(bytes: &[u8]) -> Result<ImageBuf> {
    decode_float_image(DEPTH_MAGIC, 1, bytes)
}

pub fn encode_normals(img: &ImageBuf) -> Result<Vec<u8>> {
    if img.channels != 3 {
        return Err(Error::ShapeMismatch("normal maps have three channels".into()));
    }
    Ok(encode_float_image(NORMAL_MAGIC, img))
}

pub fn decode_normals(bytes: &[u8]) -> Result<ImageBuf> {
    decode_float_image(NORMAL_MAGIC, 3, bytes)
}

pub fn write_depth(path: &Path, img: &ImageBuf) -> Result<()> {
    fs::write(path, encode_depth(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_depth(path: &Path) -> Result<ImageBuf> {
    decode_depth(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_normals(path: &Path, img: &ImageBuf) -> Result<()> {
    fs::write(path, encode_normals(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_normals(path: &Path) -> Result<ImageBuf> {
    decode_normals(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
