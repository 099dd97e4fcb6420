//! Invert a small latent, fit null embeddings, and compare the guided
//! reconstruction with and without the fitted embeddings.
//!
//! cargo run --release --example null_text_inversion

use ndarray::Array4;
use visprog::guidance::NoiseTensor;
use visprog::inversion::{
    ddim_invert, embed_prompt, make_schedule, null_text_optimize, sample, GuidanceMode, NullTextConfig, PromptEmbedding,
    ToyDenoiser,
};

fn main() {
    let steps = 10;
    let schedule = make_schedule(steps, 1e-4, 0.02).unwrap();
    let z0 = NoiseTensor::from_array(Array4::from_shape_fn((1, 3, 8, 8), |(_, c, y, x)| {
        ((x as f64 * 0.7 + c as f64).sin() + (y as f64 * 0.4).cos()) * 0.5
    }))
    .unwrap();
    let den = ToyDenoiser::new(7, steps, (3, 8, 8));
    let prompt = embed_prompt("a photo of a dog");

    let inv = ddim_invert(&z0, &prompt, &den, &schedule).unwrap();
    println!("z_T rms from z_0: {:.4}", inv.latents[steps].rms_diff(&z0).unwrap());

    for mode in [GuidanceMode::In, GuidanceMode::Cfg(7.5)] {
        let cfg = NullTextConfig { guidance: mode, ..NullTextConfig::default() };
        let fitted = null_text_optimize(&inv.latents, &prompt, &den, &schedule, &cfg).unwrap();

        // Same run with the null embeddings left at zero.
        let mut untouched = fitted.clone();
        untouched.null_embeddings = vec![PromptEmbedding::zeros(prompt.dim()); steps];
        let plain = sample(&inv.latents[steps], &prompt, &untouched, &den, &schedule, mode).unwrap();

        println!("\n{mode:?}");
        println!("  without fitting: {:.5}", plain.rms_diff(&z0).unwrap());
        println!("  with fitting:    {:.5} ({} backtracks)", fitted.reconstruction_error, fitted.backtracks);
        for t in [steps, steps / 2, 1] {
            let l = fitted.losses_at(t);
            println!("  t={t:<2} loss {:.3e} -> {:.3e}", l[0], l[l.len() - 1]);
        }
    }
}
