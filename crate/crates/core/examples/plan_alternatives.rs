//! Plan an instruction against a synthetic scene and list the alternative
//! statement orders the dataflow allows.
//!
//! cargo run --example plan_alternatives -- "change the left woman to an astronaut"

use visprog::geometry::{segment_components, ImageBuffer, LabelTable};
use visprog::planner::{plan_from_instruction, SceneSummary};

fn scene() -> ImageBuffer {
    let labels = LabelTable::default();
    let mut img = ImageBuffer::filled(96, 48, [30, 60, 30, 255]).unwrap();
    for (x0, label) in [(8, "woman"), (40, "dog"), (70, "woman")] {
        let c = labels.color_of(label).unwrap();
        for y in 14..34 {
            for x in x0..x0 + 12 {
                img.set(x, y, c);
            }
        }
    }
    img
}

fn main() {
    let instruction = std::env::args().nth(1).unwrap_or_else(|| "change the left woman to an astronaut".into());
    let img = scene();
    let scene = SceneSummary::from_rois(&segment_components(&img).unwrap(), img.dims());
    for s in &scene.segments {
        println!("segment {} at ({:.1}, {:.1}), {} px", s.label, s.centroid.0, s.centroid.1, s.area);
    }
    match plan_from_instruction(&instruction, &scene) {
        Ok(plans) => {
            for (k, p) in plans.iter().enumerate() {
                println!("\nplan {k} ({:?}), edges {:?}\n{}", p.provenance, p.dataflow.edges, p.program);
            }
        }
        Err(e) => println!("no plan: {e}"),
    }
}
