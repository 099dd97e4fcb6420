//! Deterministic raster core: RGBA buffers, regions of interest cut from
//! synthetic scenes, the position manipulator (move / scale / swap), the
//! onion-peel inpainting stub, and alpha-over compositing.
//!
//! Every operation here is a pure function of its inputs. Pixels outside an
//! operation's write set are never touched, which is what lets the executor
//! prove background preservation bit-for-bit.

mod image;
mod inpaint;
mod manip;
mod roi;
mod segment;

pub use self::image::{ImageBuffer, Mask};
pub use self::inpaint::inpaint_fill;
pub use self::manip::{move_roi, paste, scale_roi, swap_rois, swap_rois_with, Direction};
pub use self::roi::{BBox, Roi};
pub use self::segment::{resolve_selector, segment_components, segment_components_with, LabelTable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("image must be at least 1x1")]
    EmptyImage,
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("region mask has no set bits")]
    EmptyMask,
    #[error("image has a single color class; nothing to segment")]
    NoForeground,
    #[error("selector `{0}` matched no region")]
    SelectorUnresolved(String),
    #[error("selector `{selector}` matched {matches} regions; add a positional word")]
    SelectorAmbiguous { selector: String, matches: usize },
    #[error("inpaint mask covers the whole image")]
    MaskCoversImage,
    #[error("region moved entirely outside the image")]
    RegionFullyClipped,
    #[error("scaled region has zero extent")]
    DegenerateResult,
    #[error("scale factor must be positive and finite, got {0}")]
    InvalidFactor(f64),
    #[error("regions overlap")]
    OverlappingRegions,
    #[error("patch lands fully outside the image")]
    FullyOutOfBounds,
    #[error("png: {0}")]
    Png(String),
}

/// Round half up (towards +inf), used wherever coordinates are quantized.
pub fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}
