//! Instance-normalization guidance next to classifier-free guidance, plus
//! the cross-attention noise predictor.
//!
//! cargo run --example guidance_math

use ndarray::{Array2, Array4};
use visprog::guidance::{cfg_guidance, channel_stats, cross_attention, in_guidance, AttentionProj, ConvParams, NoiseTensor};

fn main() {
    let cond = NoiseTensor::<f64>::from_array(Array4::from_shape_fn((1, 2, 4, 4), |(_, c, y, x)| {
        (c as f64 + 1.0) * ((x + y) as f64 * 0.3).sin()
    }))
    .unwrap();
    let uncond = NoiseTensor::<f64>::from_array(Array4::from_shape_fn((1, 2, 4, 4), |(_, c, y, x)| {
        0.5 + 0.2 * c as f64 + ((x * y) as f64 * 0.1).cos()
    }))
    .unwrap();

    let guided = in_guidance(&cond, &uncond, &ConvParams::identity(2)).unwrap();
    let (sc, su, sg) = (channel_stats(&cond).unwrap(), channel_stats(&uncond).unwrap(), channel_stats(&guided).unwrap());
    for c in 0..2 {
        println!(
            "channel {c}: cond mean {:+.3} std {:.3} | uncond mean {:+.3} std {:.3} | IN mean {:+.3} std {:.3}",
            sc.mean[[0, c]], sc.std[[0, c]], su.mean[[0, c]], su.std[[0, c]], sg.mean[[0, c]], sg.std[[0, c]]
        );
    }

    for w in [1.0, 2.5, 7.5] {
        let out = cfg_guidance(&cond, &uncond, w).unwrap();
        println!("CFG w={w:<4} RMS from cond {:.4}", out.rms_diff(&cond).unwrap());
    }

    // Attention of 16 latent positions over 3 prompt tokens.
    let phi = Array2::from_shape_fn((16, 4), |(i, j)| ((i * 4 + j) as f64 * 0.17).sin());
    let psi = Array2::from_shape_fn((3, 5), |(i, j)| ((i + 2 * j) as f64 * 0.23).cos());
    let proj = AttentionProj {
        l_q: Array2::from_shape_fn((4, 8), |(i, j)| if i == j % 4 { 1.0 } else { 0.1 }),
        l_k: Array2::from_shape_fn((5, 8), |(i, j)| ((i + j) % 3) as f64 * 0.5),
        l_v: Array2::from_shape_fn((5, 6), |(i, j)| (i as f64 - j as f64) * 0.2),
    };
    let eps = cross_attention(&phi, &psi, &proj, 8).unwrap();
    println!("cross-attention output {:?}, row 0 {:.3}", eps.dim(), eps.row(0));
}
