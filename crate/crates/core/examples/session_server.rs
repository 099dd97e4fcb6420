//! Start the session API on a loopback port and drive it over HTTP:
//! create a session, pick a plan, step to the end, fetch the trace.
//!
//! cargo run --release --example session_server

use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value as JsonValue};
use visprog::backends::Registry;
use visprog::geometry::{ImageBuffer, LabelTable};
use visprog::service::{router, AppState};

fn post(agent: &ureq::Agent, url: &str, body: Option<JsonValue>) -> (u16, JsonValue) {
    let req = agent.post(url).header("content-type", "application/json");
    let mut resp = req.send(body.unwrap_or(JsonValue::Null).to_string()).unwrap();
    let status = resp.status().as_u16();
    (status, serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap())
}

fn main() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        tokio::runtime::Runtime::new().unwrap().block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, router(AppState::new(Registry::stubs()))).await.unwrap();
        });
    });

    let labels = LabelTable::default();
    let mut img = ImageBuffer::filled(64, 40, [30, 60, 30, 255]).unwrap();
    for (x0, label) in [(6, "dog"), (40, "cat")] {
        for y in 12..24 {
            for x in x0..x0 + 12 {
                img.set(x, y, labels.color_of(label).unwrap());
            }
        }
    }

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(60)))
        .http_status_as_error(false)
        .build()
        .into();
    let image = base64::engine::general_purpose::STANDARD.encode(img.to_png());
    let (_, s) = post(&agent, &format!("{base}/sessions"), Some(json!({ "image": image, "instruction": "swap the dog and the cat" })));
    let id = s["id"].as_str().unwrap().to_string();
    println!("session {id}");
    for p in s["plans"].as_array().unwrap() {
        println!("plan {}:\n{}", p["index"], p["program"].as_str().unwrap());
    }

    let (status, v) = post(&agent, &format!("{base}/sessions/{id}/step"), None);
    println!("step before choosing a plan: {status} {}", v["code"]);

    post(&agent, &format!("{base}/sessions/{id}/plan/0"), None);
    loop {
        let (status, v) = post(&agent, &format!("{base}/sessions/{id}/step"), None);
        if status != 200 {
            println!("stopped: {status} {}", v["code"]);
            break;
        }
        println!("pc {} {} -> {}", v["pc"], v["step"]["op"], v["artifact_urls"]);
    }

    let mut resp = agent.get(format!("{base}/sessions/{id}/trace")).call().unwrap();
    let trace: JsonValue = serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap();
    println!("trace has {} steps", trace["steps"].as_array().unwrap().len());
}
