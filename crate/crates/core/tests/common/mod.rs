#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visprog::geometry::{ImageBuffer, LabelTable};

pub const BACKGROUND: [u8; 4] = [30, 60, 30, 255];

/// Background with axis-aligned rectangles `(x, y, w, h, label)`.
pub fn scene(width: u32, height: u32, objects: &[(u32, u32, u32, u32, &str)]) -> ImageBuffer {
    let labels = LabelTable::default();
    let mut img = ImageBuffer::filled(width, height, BACKGROUND).unwrap();
    for &(x0, y0, w, h, label) in objects {
        let color = labels.color_of(label).expect("known label");
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                img.set(x, y, color);
            }
        }
    }
    img
}

pub fn two_dogs() -> ImageBuffer {
    scene(64, 40, &[(6, 10, 10, 10, "dog"), (42, 16, 10, 10, "dog")])
}

/// Random non-touching rectangles of distinct labels placed in columns.
pub fn random_scene(seed: u64) -> (ImageBuffer, Vec<&'static str>) {
    const LABELS: [&str; 6] = ["dog", "cat", "fox", "pigeon", "car", "ball"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let (w, h) = (24 * n as u32 + 8, rng.random_range(24..=40u32));
    let mut objects = Vec::new();
    for i in 0..n {
        let ow = rng.random_range(4..=14u32);
        let oh = rng.random_range(4..=(h - 8).min(16));
        let x = 4 + 24 * i as u32 + rng.random_range(0..=(18 - ow.min(18)));
        let y = rng.random_range(2..=(h - oh - 2));
        objects.push((x, y, ow, oh, LABELS[(seed as usize + i) % LABELS.len()]));
    }
    let labels = objects.iter().map(|o| o.4).collect();
    (scene(w, h, &objects), labels)
}

/// Serve `app` on an ephemeral loopback port from a background runtime.
pub fn spawn(app: axum::Router) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, app).await.unwrap();
        });
    });
    format!("http://{addr}")
}
