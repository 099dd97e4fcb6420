//! Deterministic sampling and inversion at toy scale.
//!
//! Pixels play the role of latents. A [`ToyDenoiser`] stands in for the
//! noise predictor, [`ddim_invert`] recovers the noise trajectory of an
//! input, [`null_text_optimize`] fits per-step null embeddings (and a 1×1
//! conv in IN mode) so guided sampling retraces it, and [`translate_patch`]
//! strings the three together for a region of an image.

mod denoiser;
mod nulltext;
mod schedule;
mod translate;

use thiserror::Error;

use crate::guidance::{GuidanceError, NoiseTensor, Real};

pub use denoiser::{embed_prompt, embed_prompt_dim, fnv64, PromptEmbedding, ToyDenoiser, EMBED_DIM};
pub use nulltext::{guided_eps, null_text_optimize, GuidanceMode, NullTextConfig, NullTextResult};
pub use schedule::{ddim_invert_step, ddim_step, make_schedule, Schedule};
pub use translate::{patch_to_tensor, tensor_to_patch, translate_patch, translate_patch_report, TranslateConfig, TranslateReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InversionError {
    #[error("invalid schedule range: {0}")]
    InvalidRange(String),
    #[error("step {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("non-finite values during inversion")]
    NumericalDivergence,
    #[error("non-finite loss during null-text optimization")]
    NonFiniteLoss,
    #[error("expected {expected} entries, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Inversion trajectory `z*_0 … z*_T` and the noise predictions used,
/// `eps[t − 1]` being the one evaluated at `(z*_{t−1}, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Inversion<T: Real = f64> {
    pub latents: Vec<NoiseTensor<T>>,
    pub eps: Vec<NoiseTensor<T>>,
}

/// `z*_t = √(ᾱ_t/ᾱ_{t−1})·(z*_{t−1} − c_t·ε(z*_{t−1}, t, P))` for t = 1…T.
pub fn ddim_invert<T: Real>(
    z0: &NoiseTensor<T>,
    prompt: &PromptEmbedding,
    den: &ToyDenoiser,
    schedule: &Schedule,
) -> Result<Inversion<T>, InversionError> {
    if !z0.is_finite() {
        return Err(InversionError::NumericalDivergence);
    }
    let steps = schedule.steps();
    let mut latents = Vec::with_capacity(steps + 1);
    let mut eps_all = Vec::with_capacity(steps);
    latents.push(z0.clone());
    for t in 1..=steps {
        let prev = &latents[t - 1];
        let eps = den.predict_with(prev, t, prompt)?;
        let next = ddim_invert_step(prev, t, &eps, schedule)?;
        if !next.is_finite() {
            return Err(InversionError::NumericalDivergence);
        }
        eps_all.push(eps);
        latents.push(next);
    }
    Ok(Inversion { latents, eps: eps_all })
}

/// Reverse process replaying stored noise predictions (`eps[t − 1]` at step t).
pub fn sample_with_eps<T: Real>(
    z_t: &NoiseTensor<T>,
    eps: &[NoiseTensor<T>],
    schedule: &Schedule,
) -> Result<NoiseTensor<T>, InversionError> {
    if eps.len() != schedule.steps() {
        return Err(InversionError::LengthMismatch { expected: schedule.steps(), actual: eps.len() });
    }
    let mut z = z_t.clone();
    for t in (1..=schedule.steps()).rev() {
        z = ddim_step(&z, t, &eps[t - 1], schedule)?;
    }
    Ok(z)
}

/// Guided reverse process from `z_T` with the target prompt and the fitted
/// null embeddings (and per-step convs in IN mode).
pub fn sample(
    z_t: &NoiseTensor<f64>,
    target: &PromptEmbedding,
    nulls: &NullTextResult,
    den: &ToyDenoiser,
    schedule: &Schedule,
    mode: GuidanceMode,
) -> Result<NoiseTensor<f64>, InversionError> {
    let steps = schedule.steps();
    if nulls.null_embeddings.len() != steps || nulls.convs.len() != steps {
        return Err(InversionError::LengthMismatch { expected: steps, actual: nulls.null_embeddings.len() });
    }
    let mut z = z_t.clone();
    for t in (1..=steps).rev() {
        let cond = den.predict_with(&z, t, target)?;
        let eps = guided_eps(den, &z, t, &cond, &nulls.null_embeddings[t - 1].values, &nulls.convs[t - 1], mode)?;
        z = ddim_step(&z, t, &eps, schedule)?;
    }
    if !z.is_finite() {
        return Err(InversionError::NumericalDivergence);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_latent(seed: u64, shape: (usize, usize, usize, usize)) -> NoiseTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.0 * shape.1 * shape.2 * shape.3;
        NoiseTensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_denoiser_telescopes() {
        let s = make_schedule(10, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::zero(10, (1, 2, 2), EMBED_DIM);
        let z0 = random_latent(1, (1, 1, 2, 2));
        let inv = ddim_invert(&z0, &embed_prompt("x"), &den, &s).unwrap();
        let k = s.alphas_bar()[10].sqrt();
        for (a, b) in inv.latents[10].to_vec().iter().zip(z0.to_vec()) {
            assert!((a - b * k).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_eps_round_trip() {
        let s = make_schedule(10, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::new(7, 10, (3, 4, 4));
        let z0 = random_latent(2, (1, 3, 4, 4));
        let inv = ddim_invert(&z0, &embed_prompt("dog"), &den, &s).unwrap();
        assert_eq!(inv.latents.len(), 11);
        let back = sample_with_eps(&inv.latents[10], &inv.eps, &s).unwrap();
        assert!(back.rms_diff(&z0).unwrap() < 1e-12);
        let back32 = sample_with_eps(&inv.latents[10].cast::<f32>(), &inv.eps.iter().map(|e| e.cast()).collect::<Vec<_>>(), &s).unwrap();
        assert!(back32.cast::<f64>().rms_diff(&z0).unwrap() < 1e-6);
    }

    #[test]
    fn guided_reconstruction_after_optimization() {
        let s = make_schedule(10, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::new(3, 10, (3, 8, 8));
        let z0 = random_latent(3, (1, 3, 8, 8));
        let p = embed_prompt("cat");
        let inv = ddim_invert(&z0, &p, &den, &s).unwrap();
        let r = null_text_optimize(&inv.latents, &p, &den, &s, &NullTextConfig::default()).unwrap();
        let out = sample(&inv.latents[10], &p, &r, &den, &s, GuidanceMode::In).unwrap();
        assert!(out.rms_diff(&z0).unwrap() < 5e-3);
        assert_eq!(out, sample(&inv.latents[10], &p, &r, &den, &s, GuidanceMode::In).unwrap());
    }

    #[test]
    fn cfg_scale_changes_samples() {
        let s = make_schedule(10, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::new(5, 10, (3, 4, 4));
        let z0 = random_latent(5, (1, 3, 4, 4));
        let p = embed_prompt("cat");
        let inv = ddim_invert(&z0, &p, &den, &s).unwrap();
        let cfg = NullTextConfig { guidance: GuidanceMode::Cfg(2.5), ..Default::default() };
        let r = null_text_optimize(&inv.latents, &p, &den, &s, &cfg).unwrap();
        let target = embed_prompt("dog");
        let lo = sample(&inv.latents[10], &target, &r, &den, &s, GuidanceMode::Cfg(2.5)).unwrap();
        let hi = sample(&inv.latents[10], &target, &r, &den, &s, GuidanceMode::Cfg(10.0)).unwrap();
        assert!(lo.rms_diff(&hi).unwrap() > 0.0);
    }

    #[test]
    fn non_finite_input_diverges() {
        let s = make_schedule(3, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::new(0, 3, (1, 1, 2));
        let z = NoiseTensor::<f64>::from_array_unchecked(ndarray::Array4::from_elem((1, 1, 1, 2), f64::NAN));
        assert_eq!(ddim_invert(&z, &embed_prompt(""), &den, &s), Err(InversionError::NumericalDivergence));
    }

    #[test]
    fn sample_checks_lengths() {
        let s = make_schedule(3, 1e-4, 0.02).unwrap();
        let den = ToyDenoiser::new(0, 3, (1, 1, 2));
        let z = NoiseTensor::<f64>::zeros((1, 1, 1, 2)).unwrap();
        let empty = NullTextResult {
            null_embeddings: vec![],
            convs: vec![],
            conv: crate::guidance::ConvParams::identity(1),
            loss_curve: vec![],
            initial_losses: vec![],
            reconstruction_error: 0.0,
            backtracks: 0,
        };
        assert!(matches!(
            sample(&z, &embed_prompt(""), &empty, &den, &s, GuidanceMode::In),
            Err(InversionError::LengthMismatch { .. })
        ));
    }
}
