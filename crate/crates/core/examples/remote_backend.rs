//! Route providers over HTTP. Starts the stub sidecar on a loopback port,
//! binds every role to it, and checks the result against the in-process
//! stubs. Then points the planner role at a canned LLM endpoint.
//!
//! cargo run --release --example remote_backend

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value as JsonValue};
use visprog::backends::{plan_with_registry, sidecar_router, ProviderBinding, Registry, Role};
use visprog::dsl::parse_program;
use visprog::executor::{run, ArtifactStore};
use visprog::geometry::{segment_components, ImageBuffer, LabelTable};
use visprog::planner::SceneSummary;

fn spawn(app: Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            axum::serve(tokio::net::TcpListener::from_std(listener).unwrap(), app).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn main() {
    let dog = LabelTable::default().color_of("dog").unwrap();
    let mut img = ImageBuffer::filled(64, 40, [30, 60, 30, 255]).unwrap();
    for (x0, y0) in [(6, 10), (42, 16)] {
        for y in y0..y0 + 10 {
            for x in x0..x0 + 10 {
                img.set(x, y, dog);
            }
        }
    }

    let sidecar = spawn(sidecar_router(Registry::stubs()));
    let remote = Role::ALL
        .into_iter()
        .fold(Registry::stubs(), |r, role| r.register(ProviderBinding::remote(role, &sidecar)).unwrap());
    println!("sidecar at {sidecar}");

    let program =
        parse_program("OBJ0 = Segment(IMAGE, \"left dog\")\nBG0 = Inpaint(IMAGE, OBJ0)\nOBJ1 = Translate(OBJ0, \"dog\", \"sheep\")\nOUT = Paste(BG0, OBJ1)\n")
            .unwrap();
    let (local, _) = run(&program, img.clone(), &Registry::stubs(), 1, &ArtifactStore::new()).unwrap();
    let (wire, trace) = run(&program, img.clone(), &remote, 1, &ArtifactStore::new()).unwrap();
    println!("remote run matches local: {}", local == wire);
    for t in &trace {
        println!("  {} {} -> {}", t.line, t.op, t.output.digest);
    }

    // A planner that always answers with the same program.
    let canned = "OBJ0 = Segment(IMAGE, \"right dog\")\nOUT = Inpaint(IMAGE, OBJ0)\n";
    let llm = spawn(Router::new().route(
        "/invoke",
        post(move |Json(body): Json<JsonValue>| async move {
            println!("planner got instruction {} with {} exemplars", body["instruction"], body["exemplars"].as_array().map_or(0, Vec::len));
            Json(json!({ "program": canned }))
        }),
    ));
    let reg = Registry::stubs().register(ProviderBinding::remote(Role::Planner, &llm)).unwrap();
    let scene = SceneSummary::from_rois(&segment_components(&img).unwrap(), img.dims());
    for c in plan_with_registry(&reg, "get rid of the dog on the right", &scene).unwrap() {
        println!("{:?}\n{}", c.provenance, c.program);
    }
}
