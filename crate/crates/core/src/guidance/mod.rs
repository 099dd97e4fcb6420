//! Guidance arithmetic on small dense arrays: per-channel statistics,
//! instance-normalization guidance, classifier-free guidance and
//! cross-attention.
//!
//! ```
//! use visprog::guidance::{in_guidance, ConvParams, NoiseTensor};
//!
//! let uncond = NoiseTensor::<f64>::from_vec((1, 1, 2, 2), vec![1.0, 3.0, 5.0, 7.0]).unwrap();
//! let cond = NoiseTensor::<f64>::from_vec((1, 1, 2, 2), vec![0.0, 2.0, 4.0, 6.0]).unwrap();
//! let out = in_guidance(&cond, &uncond, &ConvParams::identity(1)).unwrap();
//! assert!((out.to_vec()[0] - 2.0).abs() < 1e-9);
//! ```

mod attention;
mod tensor;

use ndarray::{Array2, Array4, Axis, Zip};
use thiserror::Error;

pub use attention::{attention_weights, cross_attention, AttentionProj};
pub use tensor::{ChannelStats, ConvParams, NoiseTensor, Real};

/// Added to the variance before the square root.
pub const STD_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize, usize, usize), right: (usize, usize, usize, usize) },
    #[error("need at least 2 spatial elements per channel, got {0}")]
    TooFewElements(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tensor shape {0}")]
    InvalidShape(String),
    #[error("tensor contains non-finite values")]
    NonFinite,
}

/// Mean over H·W, variance with divisor H·W − 1, std = sqrt(var + 1e-8).
pub fn channel_stats<T: Real>(t: &NoiseTensor<T>) -> Result<ChannelStats<T>, GuidanceError> {
    let (n, c, h, w) = t.shape();
    let hw = h * w;
    if hw < 2 {
        return Err(GuidanceError::TooFewElements(hw));
    }
    let flat = t.array().view().into_shape_with_order((n, c, hw)).expect("contiguous tensor");
    let count = T::from_usize(hw).unwrap();
    let dof = T::from_usize(hw - 1).unwrap();
    let eps = T::lit(STD_EPS);
    let mut mean = Array2::zeros((n, c));
    let mut std = Array2::zeros((n, c));
    for ((i, j), m) in mean.indexed_iter_mut() {
        let lane = flat.slice(ndarray::s![i, j, ..]);
        let mu = lane.iter().fold(T::zero(), |a, &v| a + v) / count;
        let var = lane.iter().fold(T::zero(), |a, &v| a + (v - mu) * (v - mu)) / dof;
        *m = mu;
        std[[i, j]] = (var + eps).sqrt();
    }
    Ok(ChannelStats { mean, std })
}

/// Instance-normalization guidance:
/// `σ_u · conv((uncond − μ_c) / σ_c) + μ_u`, stats per (n, c).
pub fn in_guidance<T: Real>(
    cond: &NoiseTensor<T>,
    uncond: &NoiseTensor<T>,
    conv: &ConvParams<T>,
) -> Result<NoiseTensor<T>, GuidanceError> {
    cond.ensure_same_shape(uncond)?;
    let (n, c, h, w) = cond.shape();
    if conv.channels() != c || conv.weight.dim() != (c, c) {
        return Err(GuidanceError::DimensionMismatch(format!(
            "conv for {} channels applied to {c}",
            conv.channels()
        )));
    }
    let sc = channel_stats(cond)?;
    let su = channel_stats(uncond)?;

    let mut normalized = uncond.array().clone();
    for i in 0..n {
        for j in 0..c {
            let (mu, sd) = (sc.mean[[i, j]], sc.std[[i, j]]);
            normalized.slice_mut(ndarray::s![i, j, .., ..]).mapv_inplace(|v| (v - mu) / sd);
        }
    }

    let mut out = Array4::zeros((n, c, h, w));
    for i in 0..n {
        let src = normalized.index_axis(Axis(0), i);
        let mut dst = out.index_axis_mut(Axis(0), i);
        for o in 0..c {
            let mut plane = dst.index_axis_mut(Axis(0), o);
            plane.fill(conv.bias[o]);
            for k in 0..c {
                let wk = conv.weight[[o, k]];
                Zip::from(&mut plane).and(&src.index_axis(Axis(0), k)).for_each(|d, &s| *d = *d + wk * s);
            }
            let (sd, mu) = (su.std[[i, o]], su.mean[[i, o]]);
            plane.mapv_inplace(|v| v * sd + mu);
        }
    }
    Ok(NoiseTensor::from_array_unchecked(out))
}

/// Classifier-free guidance `w·cond + (1 − w)·uncond`.
pub fn cfg_guidance<T: Real>(cond: &NoiseTensor<T>, uncond: &NoiseTensor<T>, w: T) -> Result<NoiseTensor<T>, GuidanceError> {
    cond.ensure_same_shape(uncond)?;
    let one_minus = T::one() - w;
    let out = Zip::from(cond.array()).and(uncond.array()).map_collect(|&c, &u| w * c + one_minus * u);
    Ok(NoiseTensor::from_array_unchecked(out))
}
