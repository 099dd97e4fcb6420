use serde::{Deserialize, Serialize};

use super::{GeometryError, ImageBuffer, Mask};

/// Inclusive pixel bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }
}

/// A region cut from an image: full-frame mask, tight bbox, centroid and an
/// RGBA patch of bbox extent whose alpha is 255 exactly on mask bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Roi {
    mask: Mask,
    bbox: BBox,
    label: String,
    centroid: (f64, f64),
    patch: ImageBuffer,
}

impl Roi {
    /// Cut the masked pixels of `image` into a region.
    pub fn from_mask(image: &ImageBuffer, mask: Mask, label: impl Into<String>) -> Result<Self, GeometryError> {
        if image.dims() != mask.dims() {
            return Err(GeometryError::DimensionMismatch(format!(
                "image {:?} vs mask {:?}",
                image.dims(),
                mask.dims()
            )));
        }
        let pixels: Vec<_> = mask.iter_set().map(|(x, y)| (x, y, image.get(x, y))).collect();
        Self::from_pixels(mask.width(), mask.height(), label, pixels)
    }

    /// Build a region from explicit (x, y, rgba) samples; the sample alpha is
    /// ignored since patch alpha is derived from the mask.
    pub fn from_pixels(
        width: u32,
        height: u32,
        label: impl Into<String>,
        pixels: impl IntoIterator<Item = (u32, u32, [u8; 4])>,
    ) -> Result<Self, GeometryError> {
        let pixels: Vec<_> = pixels.into_iter().collect();
        if pixels.is_empty() {
            return Err(GeometryError::EmptyMask);
        }
        let mut mask = Mask::new(width, height);
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        let (mut sx, mut sy) = (0u64, 0u64);
        for &(x, y, _) in &pixels {
            if x >= width || y >= height {
                return Err(GeometryError::DimensionMismatch(format!(
                    "pixel ({x},{y}) outside {width}x{height}"
                )));
            }
            mask.set(x, y, true);
        }
        let mut count = 0u64;
        for (x, y) in mask.iter_set() {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sx += x as u64;
            sy += y as u64;
            count += 1;
        }
        let bbox = BBox { x0, y0, x1, y1 };
        let mut patch = ImageBuffer::filled(bbox.width(), bbox.height(), [0; 4])?;
        for (x, y, [r, g, b, _]) in pixels {
            patch.set(x - x0, y - y0, [r, g, b, 255]);
        }
        let centroid = (sx as f64 / count as f64, sy as f64 / count as f64);
        Ok(Roi { mask, bbox, label: label.into(), centroid, patch })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn patch(&self) -> &ImageBuffer {
        &self.patch
    }

    pub fn area(&self) -> usize {
        self.mask.count()
    }

    /// Frame dimensions of the image this region lives in.
    pub fn frame(&self) -> (u32, u32) {
        self.mask.dims()
    }

    /// Absolute-position pixel samples of the region.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32, [u8; 4])> + '_ {
        self.mask
            .iter_set()
            .map(move |(x, y)| (x, y, self.patch.get(x - self.bbox.x0, y - self.bbox.y0)))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Replace patch colors, keeping geometry. Only RGB on mask bits is
    /// taken from `patch`; alpha and off-mask pixels are re-derived.
    pub fn with_patch(&self, patch: &ImageBuffer) -> Result<Self, GeometryError> {
        if patch.dims() != self.patch.dims() {
            return Err(GeometryError::DimensionMismatch(format!(
                "patch {:?} vs bbox {:?}",
                patch.dims(),
                self.patch.dims()
            )));
        }
        let mut out = self.clone();
        for (x, y) in self.mask.iter_set() {
            let (px, py) = (x - self.bbox.x0, y - self.bbox.y0);
            let [r, g, b, _] = patch.get(px, py);
            out.patch.set(px, py, [r, g, b, 255]);
        }
        Ok(out)
    }
}
