use super::segment::neighbours4;
use super::{GeometryError, ImageBuffer, Mask};

/// Onion-peel fill. Each pass assigns every still-masked pixel that touches a
/// known pixel (4-neighbourhood) the rounded mean RGB of its known
/// neighbours, with alpha 255; the whole ring is committed at once so the
/// result does not depend on visit order. Unmasked pixels are never written.
pub fn inpaint_fill(image: &ImageBuffer, mask: &Mask) -> Result<ImageBuffer, GeometryError> {
    if image.dims() != mask.dims() {
        return Err(GeometryError::DimensionMismatch(format!(
            "image {:?} vs mask {:?}",
            image.dims(),
            mask.dims()
        )));
    }
    if mask.is_empty() {
        return Ok(image.clone());
    }
    if mask.is_full() {
        return Err(GeometryError::MaskCoversImage);
    }
    let (w, h) = image.dims();
    let mut out = image.clone();
    let mut pending = mask.clone();
    let mut remaining = pending.count();
    while remaining > 0 {
        let mut ring = Vec::new();
        for (x, y) in pending.iter_set() {
            let (mut sum, mut n) = ([0u32; 3], 0u32);
            for (nx, ny) in neighbours4(x, y, w, h) {
                if !pending.get(nx, ny) {
                    let px = out.get(nx, ny);
                    sum[0] += px[0] as u32;
                    sum[1] += px[1] as u32;
                    sum[2] += px[2] as u32;
                    n += 1;
                }
            }
            if n > 0 {
                let avg = |s: u32| ((s + n / 2) / n) as u8;
                ring.push((x, y, [avg(sum[0]), avg(sum[1]), avg(sum[2]), 255]));
            }
        }
        debug_assert!(!ring.is_empty(), "grid is connected and mask is not full");
        for (x, y, rgba) in ring {
            out.set(x, y, rgba);
            pending.set(x, y, false);
            remaining -= 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_hole_in_uniform_field() {
        let img = ImageBuffer::filled(5, 5, [40, 80, 120, 255]).unwrap();
        let mut holed = img.clone();
        holed.set(2, 2, [255, 0, 0, 255]);
        let mut m = Mask::new(5, 5);
        m.set(2, 2, true);
        assert_eq!(inpaint_fill(&holed, &m).unwrap(), img);
    }

    #[test]
    fn unmasked_pixels_untouched() {
        let mut img = ImageBuffer::filled(6, 4, [0, 0, 0, 255]).unwrap();
        for x in 0..6 {
            img.set(x, 0, [x as u8 * 40, 10, 200, 255]);
        }
        let mut m = Mask::new(6, 4);
        for x in 1..5 {
            m.set(x, 2, true);
            m.set(x, 3, true);
        }
        let out = inpaint_fill(&img, &m).unwrap();
        let diff = img.diff_mask(&out).unwrap();
        assert!(diff.is_subset_of(&m).unwrap());
    }

    #[test]
    fn rounds_half_up() {
        // Known neighbours 10 and 11 average to 10.5 -> 11.
        let mut img = ImageBuffer::filled(3, 1, [0, 0, 0, 255]).unwrap();
        img.set(0, 0, [10, 10, 10, 255]);
        img.set(2, 0, [11, 11, 11, 255]);
        let mut m = Mask::new(3, 1);
        m.set(1, 0, true);
        assert_eq!(inpaint_fill(&img, &m).unwrap().get(1, 0), [11, 11, 11, 255]);
    }

    #[test]
    fn full_mask_is_rejected_and_empty_mask_is_identity() {
        let img = ImageBuffer::filled(2, 2, [1, 1, 1, 255]).unwrap();
        let mut full = Mask::new(2, 2);
        for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            full.set(x, y, true);
        }
        assert_eq!(inpaint_fill(&img, &full), Err(GeometryError::MaskCoversImage));
        assert_eq!(inpaint_fill(&img, &Mask::new(2, 2)).unwrap(), img);
    }
}
