//! Parse a program, show diagnostics for a broken one, and check dataflow.
//!
//! cargo run --example parse_program

use visprog::dsl::{parse_program, print_program};
use visprog::planner::validate_dataflow;

const GOOD: &str = r#"
# swap the left dog for a sheep
OBJ0 = Segment(IMAGE, "left dog")
BG0  = Inpaint(IMAGE, OBJ0)
OBJ1 = Translate(OBJ0, "dog", "sheep")
OUT  = Paste(BG0, OBJ1)
"#;

const BAD: &str = r#"
OBJ0 = Segment(IMAGE, "left dog"
BG0 = Blur(IMAGE, OBJ0)
"#;

fn main() {
    let program = parse_program(GOOD).expect("valid program");
    print!("canonical form:\n{}", print_program(&program));
    for (i, s) in program.statements.iter().enumerate() {
        println!("  line {} -> {} reads {:?}", program.line_of(i), s.output_var, s.inputs().collect::<Vec<_>>());
    }
    let df = validate_dataflow(&program).expect("acyclic");
    println!("dataflow edges: {:?}", df.dag.edges);

    match parse_program(BAD) {
        Ok(_) => unreachable!(),
        Err(diags) => {
            println!("\nbroken program:");
            for d in diags {
                println!("  {d}");
            }
        }
    }

    let forward = parse_program("A = Inpaint(IMAGE, B)\nB = Segment(IMAGE, \"dog\")\n").unwrap();
    for d in validate_dataflow(&forward).unwrap_err() {
        println!("  {d}");
    }
}
