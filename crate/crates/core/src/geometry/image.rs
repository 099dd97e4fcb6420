use std::io::Cursor;

use image::{ImageFormat, RgbaImage};

use super::GeometryError;

/// Row-major RGBA raster, 8 bits per channel.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage);
        }
        let pixels = rgba.repeat(width as usize * height as usize);
        Ok(Self { width, height, pixels })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage);
        }
        let expected = width as usize * height as usize * 4;
        if pixels.len() != expected {
            return Err(GeometryError::BufferSize { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        (y as usize * self.width as usize + x as usize) * 4
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2], self.pixels[o + 3]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgba: [u8; 4]) {
        let o = self.offset(x, y);
        self.pixels[o..o + 4].copy_from_slice(&rgba);
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    /// Decode any PNG the `image` crate understands, converting to RGBA8.
    pub fn from_png(bytes: &[u8]) -> Result<Self, GeometryError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| GeometryError::Png(e.to_string()))?
            .into_rgba8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn to_png(&self) -> Vec<u8> {
        let img = RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).expect("in-memory png encode");
        out.into_inner()
    }

    /// Nearest-neighbour downscale so neither side exceeds `max_side`.
    pub fn thumbnail(&self, max_side: u32) -> ImageBuffer {
        let longest = self.width.max(self.height);
        if longest <= max_side {
            return self.clone();
        }
        let nw = ((self.width as u64 * max_side as u64) / longest as u64).max(1) as u32;
        let nh = ((self.height as u64 * max_side as u64) / longest as u64).max(1) as u32;
        let mut out = ImageBuffer::filled(nw, nh, [0; 4]).expect("non-empty");
        for y in 0..nh {
            let sy = ((2 * y as u64 + 1) * self.height as u64 / (2 * nh as u64)) as u32;
            for x in 0..nw {
                let sx = ((2 * x as u64 + 1) * self.width as u64 / (2 * nw as u64)) as u32;
                out.set(x, y, self.get(sx, sy));
            }
        }
        out
    }

    /// Positions where two same-sized images differ.
    pub fn diff_mask(&self, other: &ImageBuffer) -> Result<Mask, GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let mut mask = Mask::new(self.width, self.height);
        for (i, (a, b)) in self.pixels.chunks_exact(4).zip(other.pixels.chunks_exact(4)).enumerate() {
            if a != b {
                mask.bits[i] = true;
            }
        }
        Ok(mask)
    }
}

/// A width×height bitmask over image coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    /// Set positions in scan order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    pub fn union(&self, other: &Mask) -> Result<Mask, GeometryError> {
        self.same_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Ok(Mask { width: self.width, height: self.height, bits })
    }

    pub fn intersects(&self, other: &Mask) -> Result<bool, GeometryError> {
        self.same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b))
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> Result<bool, GeometryError> {
        self.same_dims(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b))
    }

    fn same_dims(&self, other: &Mask) -> Result<(), GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::DimensionMismatch(format!(
                "mask {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }

    /// Grayscale PNG, 255 on set bits.
    pub fn to_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.bits.iter().map(|b| if *b { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width, self.height, raw).expect("sized");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).expect("in-memory png encode");
        out.into_inner()
    }

    /// Any non-zero luma counts as set.
    pub fn from_png(bytes: &[u8]) -> Result<Self, GeometryError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| GeometryError::Png(e.to_string()))?
            .into_luma8();
        let (w, h) = img.dimensions();
        let bits = img.into_raw().into_iter().map(|v| v != 0).collect();
        Ok(Mask { width: w, height: h, bits })
    }
}
