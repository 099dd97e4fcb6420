use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::{Array1, Array2, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::InversionError;
use crate::guidance::{NoiseTensor, Real};

/// Default embedding length.
pub const EMBED_DIM: usize = 8;

/// Fixed-length conditioning vector. The null embedding is all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptEmbedding {
    pub values: Vec<f64>,
}

impl PromptEmbedding {
    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        let na = self.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = other.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }
}

/// FNV-1a 64 of the bytes.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Hash-seeded unit vector of length [`EMBED_DIM`]; `""` maps to zeros.
pub fn embed_prompt(text: &str) -> PromptEmbedding {
    embed_prompt_dim(text, EMBED_DIM)
}

pub fn embed_prompt_dim(text: &str, dim: usize) -> PromptEmbedding {
    if text.is_empty() {
        return PromptEmbedding::zeros(dim);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fnv64(text.as_bytes()));
    let mut values: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    PromptEmbedding { values }
}

/// Linear stand-in for a noise predictor:
/// `ε(z, t, e) = A_t·z + reshape(B·e)`, weights drawn from a seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyDenoiser {
    shape: (usize, usize, usize),
    a: Vec<f64>,
    b: Array2<f64>,
}

impl ToyDenoiser {
    pub const A_SCALE: f64 = 0.05;
    pub const B_SCALE: f64 = 10.0;
    const REF_SIZE: f64 = 768.0;

    /// Denoiser for `steps` steps over (C, H, W) latents with [`EMBED_DIM`] embeddings.
    pub fn new(seed: u64, steps: usize, shape: (usize, usize, usize)) -> Self {
        Self::with_scales(seed, steps, shape, EMBED_DIM, Self::A_SCALE, Self::B_SCALE)
    }

    /// `A_t ~ a_scale·U(0,1)`; `B_ij ~ N(0,1)·b_scale/√d·√(768/n)`, n = C·H·W,
    /// so the conditioning term has comparable size for any latent size.
    pub fn with_scales(seed: u64, steps: usize, shape: (usize, usize, usize), dim: usize, a_scale: f64, b_scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (0..=steps).map(|_| a_scale * rng.random::<f64>()).collect();
        let n = shape.0 * shape.1 * shape.2;
        let k = b_scale / (dim as f64).sqrt() * (Self::REF_SIZE / n as f64).sqrt();
        let b = Array2::from_shape_simple_fn((n, dim), || k * rng.sample::<f64, _>(StandardNormal));
        Self { shape, a, b }
    }

    /// Predicts zero everywhere.
    pub fn zero(steps: usize, shape: (usize, usize, usize), dim: usize) -> Self {
        let n = shape.0 * shape.1 * shape.2;
        Self { shape, a: vec![0.0; steps + 1], b: Array2::zeros((n, dim)) }
    }

    pub fn steps(&self) -> usize {
        self.a.len() - 1
    }

    pub fn latent_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn embed_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn predict<T: Real>(&self, z: &NoiseTensor<T>, t: usize, embedding: &[T]) -> Result<NoiseTensor<T>, InversionError> {
        let (n, c, h, w) = z.shape();
        if (c, h, w) != self.shape {
            return Err(InversionError::ShapeMismatch(format!("latent {:?} vs denoiser {:?}", (c, h, w), self.shape)));
        }
        if embedding.len() != self.embed_dim() {
            return Err(InversionError::ShapeMismatch(format!(
                "embedding of {} vs denoiser dim {}",
                embedding.len(),
                self.embed_dim()
            )));
        }
        if t > self.steps() {
            return Err(InversionError::StepOutOfRange { t, steps: self.steps() });
        }
        let e = Array1::from_iter(embedding.iter().map(|v| v.to_f64().unwrap()));
        let cond = self.b.dot(&e).into_shape_with_order((c, h, w)).expect("n = c*h*w");
        let a_t = self.a[t];
        let mut out = Array4::<T>::zeros((n, c, h, w));
        for (mut dst, src) in out.axis_iter_mut(Axis(0)).zip(z.array().axis_iter(Axis(0))) {
            ndarray::Zip::from(&mut dst)
                .and(&src)
                .and(&cond)
                .for_each(|o, &zv, &cv| *o = T::lit(a_t * zv.to_f64().unwrap() + cv));
        }
        Ok(NoiseTensor::from_array_unchecked(out))
    }

    pub fn predict_with<T: Real>(&self, z: &NoiseTensor<T>, t: usize, embedding: &PromptEmbedding) -> Result<NoiseTensor<T>, InversionError> {
        let e: Vec<T> = embedding.values.iter().map(|&v| T::lit(v)).collect();
        self.predict(z, t, &e)
    }
}
