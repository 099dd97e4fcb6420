//! Execute a plan one statement at a time, repeat a step with a different
//! argument, roll back, and write the HTML trace report.
//!
//! cargo run --example step_through -- /tmp/visprog-report

use std::path::PathBuf;

use visprog::backends::Registry;
use visprog::dsl::{parse_program, Arg};
use visprog::executor::{init_state, render_trace, repeat, rollback, step, ArtifactStore, Overrides};
use visprog::geometry::ImageBuffer;

fn main() {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/step_through".into()));
    let mut img = ImageBuffer::filled(64, 40, [30, 60, 30, 255]).unwrap();
    for y in 12..24 {
        for x in 6..16 {
            img.set(x, y, [200, 120, 40, 255]);
        }
    }
    let program = parse_program(
        "OBJ0 = Segment(IMAGE, \"dog\")\nBG0 = Inpaint(IMAGE, OBJ0)\nOBJ1 = Move(OBJ0, \"right\", 10)\nOUT = Paste(BG0, OBJ1)\n",
    )
    .unwrap();
    let registry = Registry::stubs();
    let store = ArtifactStore::new();
    let mut state = init_state(img, 0).unwrap();

    for _ in 0..3 {
        let t = step(&mut state, &program, &registry, &store).unwrap();
        println!("{} {} -> {} ({})", t.line, t.op, t.output.name, t.output.digest);
    }
    // Not far enough: move by 30 instead.
    let ov = Overrides { args: [(2, Arg::Number(30.0))].into(), ..Default::default() };
    let t = repeat(&mut state, &program, &registry, &store, &ov).unwrap();
    println!("repeat #{} of line {} -> {}", t.repeat_count, t.line, t.output.digest);

    rollback(&mut state, &program, &registry, &store).unwrap();
    println!("rolled back to pc {}", state.pc);
    while state.pc < program.len() {
        step(&mut state, &program, &registry, &store).unwrap();
    }

    let report = render_trace(&state.history, &store).unwrap();
    std::fs::create_dir_all(&out_dir).unwrap();
    std::fs::write(out_dir.join("report.html"), report.html).unwrap();
    std::fs::write(out_dir.join("trace.json"), report.json).unwrap();
    println!("report written to {}", out_dir.display());
}
