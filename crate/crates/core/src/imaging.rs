//! Raster and mask primitives shared by every pipeline stage.

use std::path::Path;

use image::{ImageBuffer, ImageReader, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
    /// Opaque provenance tag (plate id, set).
    pub source_id: String,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Invalid(format!(
                "raster must be non-empty, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Invalid(format!(
                "raster {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            source_id: String::new(),
        })
    }

    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn with_source(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: [u8; 3]) {
        self.pixels[y * self.width + x] = value;
    }

    /// Copy of the `w`x`h` window at (`x`, `y`).
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Raster> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::OutOfBounds {
                x,
                y,
                patch: w.max(h),
                width: self.width,
                height: self.height,
            });
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            pixels.extend_from_slice(&self.pixels[start..start + w]);
        }
        Ok(Raster {
            width: w,
            height: h,
            pixels,
            source_id: self.source_id.clone(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let flat: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let buf: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, flat).expect("raster buffer size");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Encode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

/// Role of a binary mask within the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Fragment,
    Text,
    Fill,
}

/// Row-major boolean pixel set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    pub kind: MaskKind,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>, kind: MaskKind) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Invalid(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
            kind,
        })
    }

    pub fn empty(width: usize, height: usize, kind: MaskKind) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
            kind,
        }
    }

    pub fn full(width: usize, height: usize, kind: MaskKind) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
            kind,
        }
    }

    pub fn from_fn(width: usize, height: usize, kind: MaskKind, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
            kind,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn with_kind(mut self, kind: MaskKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn same_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: width,
                right_h: height,
            });
        }
        Ok(())
    }

    /// Pixels set in `self` but not in `other`.
    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask> {
        other.same_shape(self.width, self.height)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && !b).collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
            kind: self.kind,
        })
    }

    /// Pixels set in both masks.
    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        other.same_shape(self.width, self.height)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect();
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits,
            kind: self.kind,
        })
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<BinaryMask> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::OutOfBounds {
                x,
                y,
                patch: w.max(h),
                width: self.width,
                height: self.height,
            });
        }
        let mut bits = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            bits.extend_from_slice(&self.bits[start..start + w]);
        }
        Ok(BinaryMask {
            width: w,
            height: h,
            bits,
            kind: self.kind,
        })
    }

    /// Loads a 1-bit or 8-bit (or any decodable) image; nonzero luma is set.
    pub fn load(path: &Path, kind: MaskKind) -> Result<BinaryMask> {
        let img = open_image(path)?.into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.as_raw().iter().map(|&v| v != 0).collect();
        BinaryMask::new(w as usize, h as usize, bits, kind)
    }

    /// Writes an 8-bit grayscale PNG: set = 255, unset = 0.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("mask buffer size");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Encode {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }
}

/// Per-pixel HSV saturation in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationMatrix {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaturationMatrix {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::Invalid(format!(
                "saturation matrix {width}x{height} with {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("saturation value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Transposed copy (rows become columns).
    pub fn transpose(&self) -> SaturationMatrix {
        let mut values = vec![0.0; self.values.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                values[x * self.height + y] = self.values[y * self.width + x];
            }
        }
        SaturationMatrix {
            width: self.height,
            height: self.width,
            values,
        }
    }
}

fn open_image(path: &Path) -> Result<image::DynamicImage> {
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    ImageReader::open(path)
        .map_err(|e| decode_err(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?
        .decode()
        .map_err(|e| decode_err(e.to_string()))
}

/// Decodes PNG, JPEG or TIFF into an 8-bit RGB raster.
///
/// Higher bit depths are reduced to 8 bits per channel; alpha is dropped.
pub fn load_image(path: &Path) -> Result<Raster> {
    let img = open_image(path)?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    Ok(Raster::new(w as usize, h as usize, pixels)?.with_source(path.display().to_string()))
}

/// Hexcone HSV saturation of one pixel: `(max - min) / max`, zero for black.
#[inline]
pub fn saturation(rgb: [u8; 3]) -> f64 {
    let max = rgb[0].max(rgb[1]).max(rgb[2]);
    if max == 0 {
        return 0.0;
    }
    let min = rgb[0].min(rgb[1]).min(rgb[2]);
    (max - min) as f64 / max as f64
}

/// HSV value channel, `max / 255`.
#[inline]
pub fn value(rgb: [u8; 3]) -> f64 {
    rgb[0].max(rgb[1]).max(rgb[2]) as f64 / 255.0
}

pub fn to_saturation(raster: &Raster) -> SaturationMatrix {
    SaturationMatrix {
        width: raster.width,
        height: raster.height,
        values: raster.pixels.iter().map(|&p| saturation(p)).collect(),
    }
}

/// Dilation by a 3x3 square structuring element, clipped at the borders.
pub fn dilate_mask(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    // Separable: horizontal pass then vertical pass.
    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &mask.bits[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(1);
            let hi = (x + 1).min(w - 1);
            horiz[y * w + x] = row[lo..=hi].iter().any(|&b| b);
        }
    }
    let mut bits = vec![false; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(1);
        let hi = (y + 1).min(h - 1);
        for x in 0..w {
            bits[y * w + x] = (lo..=hi).any(|yy| horiz[yy * w + x]);
        }
    }
    BinaryMask {
        width: w,
        height: h,
        bits,
        kind: mask.kind,
    }
}

/// Pixelwise OR of two equally sized masks; the result is a fill mask.
pub fn union_masks(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    b.same_shape(a.width, a.height)?;
    let bits = a.bits.iter().zip(&b.bits).map(|(&p, &q)| p || q).collect();
    Ok(BinaryMask {
        width: a.width,
        height: a.height,
        bits,
        kind: MaskKind::Fill,
    })
}
