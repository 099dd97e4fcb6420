//! Translate one region under several CFG scales and under IN guidance,
//! then write the images and the pairwise RMS table.
//!
//! cargo run --release --example guidance_sweep -- target/sweep

use std::path::PathBuf;

use visprog::backends::Registry;
use visprog::geometry::{ImageBuffer, LabelTable};
use visprog::service::{ablate, write_ablation, DEFAULT_SWEEP};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/sweep".into()));
    let dog = LabelTable::default().color_of("dog").unwrap();
    let mut img = ImageBuffer::filled(48, 32, [30, 60, 30, 255]).unwrap();
    for y in 8..20 {
        for x in 10..22 {
            img.set(x, y, dog);
        }
    }

    let report = ablate(&Registry::stubs(), &img, "dog", "dog", "wolf", &DEFAULT_SWEEP, 0).unwrap();
    print!("{:>10}", "");
    for o in &report.outputs {
        print!("{:>10}", o.name);
    }
    println!();
    for (o, row) in report.outputs.iter().zip(&report.rms) {
        print!("{:>10}", o.name);
        for v in row {
            print!("{v:>10.3}");
        }
        println!();
    }
    write_ablation(&report, &dir).unwrap();
    println!("wrote {}", dir.display());
}
