use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{inpaint_fill, round_half_up, GeometryError, ImageBuffer, Roi};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    fn delta(self, amount: i64) -> (i64, i64) {
        match self {
            Direction::Left => (-amount, 0),
            Direction::Right => (amount, 0),
            Direction::Up => (0, -amount),
            Direction::Down => (0, amount),
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Translate a region by `amount` pixels; bits pushed past `bounds` are dropped.
pub fn move_roi(roi: &Roi, direction: Direction, amount: u32, bounds: (u32, u32)) -> Result<Roi, GeometryError> {
    let (dx, dy) = direction.delta(amount as i64);
    let (w, h) = bounds;
    let moved: Vec<_> = roi
        .pixels()
        .filter_map(|(x, y, px)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            (nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64).then_some((nx as u32, ny as u32, px))
        })
        .collect();
    if moved.is_empty() {
        return Err(GeometryError::RegionFullyClipped);
    }
    Roi::from_pixels(w, h, roi.label(), moved)
}

/// Nearest-neighbour resample about the centroid. The sampling grid is
/// round(old_dims * factor); source index for output column i is
/// floor((i + 0.5) * old / new).
pub fn scale_roi(roi: &Roi, factor: f64, bounds: (u32, u32)) -> Result<Roi, GeometryError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(GeometryError::InvalidFactor(factor));
    }
    let bbox = roi.bbox();
    let (ow, oh) = (bbox.width() as i64, bbox.height() as i64);
    let nw = round_half_up(ow as f64 * factor);
    let nh = round_half_up(oh as f64 * factor);
    if nw <= 0 || nh <= 0 {
        return Err(GeometryError::DegenerateResult);
    }
    let (cx, cy) = roi.centroid();
    let nx0 = round_half_up(cx + 0.5 - (cx - bbox.x0 as f64 + 0.5) * nw as f64 / ow as f64);
    let ny0 = round_half_up(cy + 0.5 - (cy - bbox.y0 as f64 + 0.5) * nh as f64 / oh as f64);

    let (w, h) = bounds;
    let mask = roi.mask();
    let patch = roi.patch();
    let mut pixels = Vec::new();
    for j in 0..nh {
        let sy = ((2 * j + 1) * oh / (2 * nh)) as u32;
        let ty = ny0 + j;
        if ty < 0 || ty >= h as i64 {
            continue;
        }
        for i in 0..nw {
            let sx = ((2 * i + 1) * ow / (2 * nw)) as u32;
            let tx = nx0 + i;
            if tx < 0 || tx >= w as i64 {
                continue;
            }
            if mask.get(bbox.x0 + sx, bbox.y0 + sy) {
                pixels.push((tx as u32, ty as u32, patch.get(sx, sy)));
            }
        }
    }
    if pixels.is_empty() {
        return Err(GeometryError::DegenerateResult);
    }
    Roi::from_pixels(w, h, roi.label(), pixels)
}

/// Alpha-over composite of the region patch, centred on `at` (default: the
/// region's own centroid). Pixels under zero patch alpha are left alone.
pub fn paste(background: &ImageBuffer, roi: &Roi, at: Option<(f64, f64)>) -> Result<ImageBuffer, GeometryError> {
    let (cx, cy) = roi.centroid();
    let (tx, ty) = at.unwrap_or((cx, cy));
    let dx = round_half_up(tx - cx);
    let dy = round_half_up(ty - cy);
    let bbox = roi.bbox();
    let ox = bbox.x0 as i64 + dx;
    let oy = bbox.y0 as i64 + dy;
    let patch = roi.patch();
    let (pw, ph) = patch.dims();
    let (w, h) = background.dims();
    let overlaps = ox < w as i64 && oy < h as i64 && ox + pw as i64 > 0 && oy + ph as i64 > 0;
    if !overlaps {
        return Err(GeometryError::FullyOutOfBounds);
    }
    let mut out = background.clone();
    for py in 0..ph {
        for px in 0..pw {
            let (x, y) = (ox + px as i64, oy + py as i64);
            if !background.contains(x, y) {
                continue;
            }
            let src = patch.get(px, py);
            if src[3] == 0 {
                continue;
            }
            let dst = out.get(x as u32, y as u32);
            out.set(x as u32, y as u32, alpha_over(src, dst));
        }
    }
    Ok(out)
}

fn alpha_over(src: [u8; 4], dst: [u8; 4]) -> [u8; 4] {
    let a = src[3] as u32;
    if a == 255 {
        return src;
    }
    let inv = 255 - a;
    let mix = |s: u8, d: u8| ((s as u32 * a + d as u32 * inv + 127) / 255) as u8;
    [
        mix(src[0], dst[0]),
        mix(src[1], dst[1]),
        mix(src[2], dst[2]),
        (a + (dst[3] as u32 * inv + 127) / 255) as u8,
    ]
}

/// Exchange two disjoint regions: fill both holes, then paste `a` at `b`'s
/// centroid and `b` at `a`'s (later paste wins on collision).
pub fn swap_rois(image: &ImageBuffer, a: &Roi, b: &Roi) -> Result<ImageBuffer, GeometryError> {
    swap_rois_with(image, a, b, inpaint_fill)
}

/// `swap_rois` with a caller-supplied hole filler.
pub fn swap_rois_with<E, F>(image: &ImageBuffer, a: &Roi, b: &Roi, fill: F) -> Result<ImageBuffer, E>
where
    E: From<GeometryError>,
    F: FnOnce(&ImageBuffer, &super::Mask) -> Result<ImageBuffer, E>,
{
    if a.mask().intersects(b.mask())? {
        return Err(GeometryError::OverlappingRegions.into());
    }
    let hole = a.mask().union(b.mask())?;
    let background = fill(image, &hole)?;
    let out = paste(&background, a, Some(b.centroid()))?;
    Ok(paste(&out, b, Some(a.centroid()))?)
}
