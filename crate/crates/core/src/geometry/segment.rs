use std::collections::{HashMap, VecDeque};

use super::{GeometryError, ImageBuffer, Mask, Roi};
use crate::dsl::{Positional, Selector};

/// Maps exact RGB colors to class names for the stub segmenter.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelTable {
    entries: Vec<([u8; 3], String)>,
    fallback: String,
}

impl Default for LabelTable {
    fn default() -> Self {
        let entries = [
            ([200, 120, 40], "dog"),
            ([240, 240, 230], "sheep"),
            ([90, 90, 90], "cat"),
            ([230, 110, 20], "fox"),
            ([150, 150, 165], "wolf"),
            ([120, 130, 170], "pigeon"),
            ([220, 170, 140], "woman"),
            ([250, 250, 255], "astronaut"),
            ([40, 160, 220], "bird"),
            ([200, 30, 30], "car"),
            ([30, 140, 50], "tree"),
            ([110, 70, 40], "horse"),
            ([250, 210, 0], "ball"),
        ];
        Self {
            entries: entries.into_iter().map(|(c, n)| (c, n.to_string())).collect(),
            fallback: "object".to_string(),
        }
    }
}

impl LabelTable {
    pub fn new(entries: Vec<([u8; 3], String)>, fallback: impl Into<String>) -> Self {
        Self { entries, fallback: fallback.into() }
    }

    pub fn label_for(&self, rgba: [u8; 4]) -> &str {
        let rgb = [rgba[0], rgba[1], rgba[2]];
        self.entries
            .iter()
            .find(|(c, _)| *c == rgb)
            .map(|(_, n)| n.as_str())
            .unwrap_or(&self.fallback)
    }

    /// Color registered for a class name, if any.
    pub fn color_of(&self, label: &str) -> Option<[u8; 4]> {
        self.entries
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(label))
            .map(|(c, _)| [c[0], c[1], c[2], 255])
    }
}

pub fn segment_components(image: &ImageBuffer) -> Result<Vec<Roi>, GeometryError> {
    segment_components_with(image, &LabelTable::default())
}

/// 4-connected components of every non-background color class. Background is
/// the modal color (ties go to the color seen first in scan order). Output is
/// sorted by centroid x, then centroid y, then first-pixel scan index.
pub fn segment_components_with(image: &ImageBuffer, labels: &LabelTable) -> Result<Vec<Roi>, GeometryError> {
    let (w, h) = image.dims();
    let background = modal_color(image);

    let mut seen = Mask::new(w, h);
    let mut found: Vec<(usize, Roi)> = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let color = image.get(x, y);
            if color == background || seen.get(x, y) {
                continue;
            }
            let first = y as usize * w as usize + x as usize;
            let mut component = Mask::new(w, h);
            seen.set(x, y, true);
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                component.set(cx, cy, true);
                for (nx, ny) in neighbours4(cx, cy, w, h) {
                    if !seen.get(nx, ny) && image.get(nx, ny) == color {
                        seen.set(nx, ny, true);
                        queue.push_back((nx, ny));
                    }
                }
            }
            let roi = Roi::from_mask(image, component, labels.label_for(color))?;
            found.push((first, roi));
        }
    }
    if found.is_empty() {
        return Err(GeometryError::NoForeground);
    }
    found.sort_by(|(fa, a), (fb, b)| {
        let (ax, ay) = a.centroid();
        let (bx, by) = b.centroid();
        ax.total_cmp(&bx).then(ay.total_cmp(&by)).then(fa.cmp(fb))
    });
    Ok(found.into_iter().map(|(_, r)| r).collect())
}

fn modal_color(image: &ImageBuffer) -> [u8; 4] {
    // (count, first index)
    let mut counts: HashMap<[u8; 4], (usize, usize)> = HashMap::new();
    for (i, px) in image.as_bytes().chunks_exact(4).enumerate() {
        let key = [px[0], px[1], px[2], px[3]];
        counts.entry(key).or_insert((0, i)).0 += 1;
    }
    counts
        .into_iter()
        .max_by(|(_, (ca, fa)), (_, (cb, fb))| ca.cmp(cb).then(fb.cmp(fa)))
        .map(|(c, _)| c)
        .expect("image is non-empty")
}

pub(crate) fn neighbours4(x: u32, y: u32, w: u32, h: u32) -> impl Iterator<Item = (u32, u32)> {
    let (x, y) = (x as i64, y as i64);
    [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
        .into_iter()
        .filter(move |&(nx, ny)| nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64)
        .map(|(nx, ny)| (nx as u32, ny as u32))
}

/// Ground a selector against regions sorted as `segment_components` emits
/// them. Attribute predicates are not checked; the stub segmenter only knows
/// class labels.
pub fn resolve_selector(rois: &[Roi], selector: &Selector) -> Result<Roi, GeometryError> {
    let matching: Vec<&Roi> = rois
        .iter()
        .filter(|r| r.label().eq_ignore_ascii_case(&selector.class_name))
        .collect();
    let unresolved = || GeometryError::SelectorUnresolved(selector.to_string());
    if matching.is_empty() {
        return Err(unresolved());
    }
    let pick = match selector.positional {
        Positional::Left => matching[0],
        Positional::Right => matching[matching.len() - 1],
        Positional::Middle => matching[matching.len() / 2],
        Positional::FarLeft => matching
            .iter()
            .copied()
            .reduce(|best, r| if r.centroid().0 < best.centroid().0 { r } else { best })
            .expect("non-empty"),
        Positional::FarRight => matching
            .iter()
            .copied()
            .reduce(|best, r| if r.centroid().0 >= best.centroid().0 { r } else { best })
            .expect("non-empty"),
        Positional::Index(k) => *matching.get(k).ok_or_else(unresolved)?,
        Positional::All => {
            if matching.len() > 1 {
                return Err(GeometryError::SelectorAmbiguous {
                    selector: selector.to_string(),
                    matches: matching.len(),
                });
            }
            matching[0]
        }
    };
    Ok(pick.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_selector;

    fn scene(objects: &[(u32, u32, u32, [u8; 3])]) -> ImageBuffer {
        let mut img = ImageBuffer::filled(100, 40, [20, 20, 20, 255]).unwrap();
        for &(x, y, s, [r, g, b]) in objects {
            for yy in y..y + s {
                for xx in x..x + s {
                    img.set(xx, yy, [r, g, b, 255]);
                }
            }
        }
        img
    }

    const FOX: [u8; 3] = [230, 110, 20];
    const WOLF: [u8; 3] = [150, 150, 165];

    #[test]
    fn disc_and_square_ordered_by_x() {
        let mut img = ImageBuffer::filled(80, 40, [255, 255, 255, 255]).unwrap();
        for y in 0..40u32 {
            for x in 0..80u32 {
                let (dx, dy) = (x as f64 - 20.0, y as f64 - 20.0);
                if dx * dx + dy * dy <= 64.0 {
                    img.set(x, y, [255, 0, 0, 255]);
                }
                if (55..65).contains(&x) && (15..25).contains(&y) {
                    img.set(x, y, [0, 0, 255, 255]);
                }
            }
        }
        let rois = segment_components(&img).unwrap();
        assert_eq!(rois.len(), 2);
        assert!((rois[0].centroid().0 - 20.0).abs() < 1e-9);
        assert!((rois[1].centroid().0 - 59.5).abs() < 1e-9);
    }

    #[test]
    fn uniform_image_has_no_foreground() {
        let img = ImageBuffer::filled(9, 9, [1, 2, 3, 255]).unwrap();
        assert_eq!(segment_components(&img), Err(GeometryError::NoForeground));
    }

    #[test]
    fn single_foreground_pixel() {
        let mut img = ImageBuffer::filled(9, 9, [1, 2, 3, 255]).unwrap();
        img.set(4, 7, [230, 110, 20, 255]);
        let rois = segment_components(&img).unwrap();
        assert_eq!(rois.len(), 1);
        assert_eq!(rois[0].label(), "fox");
        assert_eq!(rois[0].centroid(), (4.0, 7.0));
        assert_eq!(rois[0].bbox().area(), 1);
    }

    #[test]
    fn diagonal_pixels_are_separate_components() {
        let mut img = ImageBuffer::filled(4, 4, [0, 0, 0, 255]).unwrap();
        img.set(1, 1, [9, 9, 9, 255]);
        img.set(2, 2, [9, 9, 9, 255]);
        assert_eq!(segment_components(&img).unwrap().len(), 2);
    }

    #[test]
    fn middle_fox() {
        let img = scene(&[(3, 5, 5, FOX), (48, 5, 5, FOX), (93, 5, 5, FOX)]);
        let rois = segment_components(&img).unwrap();
        let pick = resolve_selector(&rois, &parse_selector("middle fox").unwrap()).unwrap();
        assert_eq!(pick.centroid().0, 50.0);
    }

    #[test]
    fn right_fox_skips_the_wolf() {
        let img = scene(&[(3, 5, 5, FOX), (40, 5, 5, FOX), (80, 5, 5, WOLF)]);
        let rois = segment_components(&img).unwrap();
        let pick = resolve_selector(&rois, &parse_selector("right fox").unwrap()).unwrap();
        assert_eq!(pick.label(), "fox");
        assert_eq!(pick.centroid().0, 42.0);
    }

    #[test]
    fn unknown_class_is_unresolved_and_bare_class_needs_uniqueness() {
        let img = scene(&[(3, 5, 5, FOX), (40, 5, 5, FOX)]);
        let rois = segment_components(&img).unwrap();
        assert!(matches!(
            resolve_selector(&rois, &parse_selector("cat").unwrap()),
            Err(GeometryError::SelectorUnresolved(_))
        ));
        assert!(matches!(
            resolve_selector(&rois, &parse_selector("fox").unwrap()),
            Err(GeometryError::SelectorAmbiguous { matches: 2, .. })
        ));
        assert!(matches!(
            resolve_selector(&rois, &parse_selector("#2 fox").unwrap()),
            Err(GeometryError::SelectorUnresolved(_))
        ));
    }
}
