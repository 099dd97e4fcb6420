//! Segmentation, selector grounding and the region operations on a toy
//! scene with two pigeons and a cat.
//!
//! cargo run --example geometry_ops

use visprog::dsl::parse_selector;
use visprog::geometry::{
    inpaint_fill, move_roi, paste, resolve_selector, scale_roi, segment_components, swap_rois, Direction, ImageBuffer,
};

fn main() {
    let mut img = ImageBuffer::filled(80, 40, [30, 60, 30, 255]).unwrap();
    for (x0, y0, color) in [(5, 10, [120, 130, 170, 255]), (30, 20, [90, 90, 90, 255]), (60, 12, [120, 130, 170, 255])] {
        for y in y0..y0 + 8 {
            for x in x0..x0 + 8 {
                img.set(x, y, color);
            }
        }
    }
    let rois = segment_components(&img).unwrap();
    for r in &rois {
        println!("{:<7} bbox {:?} centroid {:?}", r.label(), r.bbox(), r.centroid());
    }

    for phrase in ["right pigeon", "far left pigeon", "#1 pigeon", "cat", "pigeon"] {
        match resolve_selector(&rois, &parse_selector(phrase).unwrap()) {
            Ok(r) => println!("{phrase:>16} -> {} at {:?}", r.label(), r.centroid()),
            Err(e) => println!("{phrase:>16} -> {e}"),
        }
    }

    let right = resolve_selector(&rois, &parse_selector("right pigeon").unwrap()).unwrap();
    let bg = inpaint_fill(&img, right.mask()).unwrap();
    let moved = move_roi(&right, Direction::Down, 10, img.dims()).unwrap();
    let big = scale_roi(&right, 1.5, img.dims()).unwrap();
    println!("moved centroid {:?}, scaled bbox {:?}", moved.centroid(), big.bbox());
    let edited = paste(&bg, &moved, None).unwrap();
    println!("move changed {} pixels", img.diff_mask(&edited).unwrap().count());

    let swapped = swap_rois(&img, &rois[0], &rois[1]).unwrap();
    println!("swap changed {} pixels", img.diff_mask(&swapped).unwrap().count());
}
