use serde::{Deserialize, Serialize};

use super::{ddim_step, InversionError, PromptEmbedding, Schedule, ToyDenoiser};
use crate::guidance::{cfg_guidance, in_guidance, ConvParams, NoiseTensor};

/// How conditional and unconditional predictions are combined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GuidanceMode {
    #[serde(rename = "IN")]
    In,
    #[serde(rename = "CFG")]
    Cfg(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullTextConfig {
    pub inner_steps: usize,
    pub step_size: f64,
    pub guidance: GuidanceMode,
    /// Halve the step (up to 40 times) whenever it would raise the loss.
    pub backtrack: bool,
    /// Central-difference step.
    pub fd_step: f64,
}

impl Default for NullTextConfig {
    fn default() -> Self {
        Self { inner_steps: 10, step_size: 1e-2, guidance: GuidanceMode::In, backtrack: true, fd_step: 1e-4 }
    }
}

/// Output of the optimization. Per-step vectors are indexed by `t − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NullTextResult {
    pub null_embeddings: Vec<PromptEmbedding>,
    pub convs: Vec<ConvParams<f64>>,
    pub conv: ConvParams<f64>,
    /// Loss after every inner update, in order t = T…1.
    pub loss_curve: Vec<f64>,
    /// Loss before the first update at each t, in order t = T…1.
    pub initial_losses: Vec<f64>,
    /// RMS between the guided reconstruction and `z*_0`.
    pub reconstruction_error: f64,
    /// Number of step halvings performed.
    pub backtracks: usize,
}

impl NullTextResult {
    pub fn steps(&self) -> usize {
        self.null_embeddings.len()
    }

    /// Loss sequence at one t: the initial loss followed by its N updates.
    pub fn losses_at(&self, t: usize) -> Vec<f64> {
        let steps = self.steps();
        let per = self.loss_curve.len() / steps.max(1);
        let k = steps - t;
        std::iter::once(self.initial_losses[k]).chain(self.loss_curve[k * per..(k + 1) * per].iter().copied()).collect()
    }
}

/// Guided noise prediction in 64-bit.
pub fn guided_eps(
    den: &ToyDenoiser,
    z: &NoiseTensor<f64>,
    t: usize,
    cond: &NoiseTensor<f64>,
    null: &[f64],
    conv: &ConvParams<f64>,
    mode: GuidanceMode,
) -> Result<NoiseTensor<f64>, InversionError> {
    let uncond = den.predict(z, t, null)?;
    Ok(match mode {
        GuidanceMode::In => in_guidance(cond, &uncond, conv)?,
        GuidanceMode::Cfg(w) => cfg_guidance(cond, &uncond, w)?,
    })
}

/// Per-timestep descent on the null embedding (and, in IN mode, the 1×1 conv)
/// so that the guided reverse step from `z̄_t` lands on `z*_{t−1}`.
pub fn null_text_optimize(
    trajectory: &[NoiseTensor<f64>],
    source: &PromptEmbedding,
    den: &ToyDenoiser,
    schedule: &Schedule,
    cfg: &NullTextConfig,
) -> Result<NullTextResult, InversionError> {
    let steps = schedule.steps();
    if trajectory.len() != steps + 1 {
        return Err(InversionError::LengthMismatch { expected: steps + 1, actual: trajectory.len() });
    }
    if cfg.inner_steps == 0 || !(cfg.step_size >= 0.0) || !(cfg.fd_step > 0.0) {
        return Err(InversionError::InvalidConfig(format!(
            "inner_steps {} step_size {} fd_step {}",
            cfg.inner_steps, cfg.step_size, cfg.fd_step
        )));
    }
    let dim = den.embed_dim();
    let channels = trajectory[0].shape().1;
    let optimize_conv = cfg.guidance == GuidanceMode::In;
    let unpack = |p: &[f64]| -> ConvParams<f64> {
        if optimize_conv {
            ConvParams::from_flat(channels, &p[dim..]).expect("sized by pack")
        } else {
            ConvParams::identity(channels)
        }
    };

    let mut null = vec![0.0; dim];
    let mut conv = ConvParams::identity(channels);
    let mut z_bar = trajectory[steps].clone();
    let mut result = NullTextResult {
        null_embeddings: vec![PromptEmbedding::zeros(dim); steps],
        convs: vec![ConvParams::identity(channels); steps],
        conv: ConvParams::identity(channels),
        loss_curve: Vec::with_capacity(steps * cfg.inner_steps),
        initial_losses: Vec::with_capacity(steps),
        reconstruction_error: 0.0,
        backtracks: 0,
    };

    for t in (1..=steps).rev() {
        let cond = den.predict_with(&z_bar, t, source)?;
        let target = &trajectory[t - 1];
        let loss = |p: &[f64]| -> Result<f64, InversionError> {
            let eps = guided_eps(den, &z_bar, t, &cond, &p[..dim], &unpack(p), cfg.guidance)?;
            Ok(target.sq_dist(&ddim_step(&z_bar, t, &eps, schedule)?)?)
        };

        let mut p = null.clone();
        if optimize_conv {
            p.extend(conv.to_flat());
        }
        let mut current = finite(loss(&p)?)?;
        result.initial_losses.push(current);

        for _ in 0..cfg.inner_steps {
            let grad = central_diff(&loss, &p, cfg.fd_step)?;
            let mut step = cfg.step_size;
            let mut accepted = None;
            for _ in 0..if cfg.backtrack { 41 } else { 1 } {
                let q: Vec<f64> = p.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                let l = loss(&q)?;
                if !cfg.backtrack || l <= current {
                    accepted = Some((q, l));
                    break;
                }
                step /= 2.0;
                result.backtracks += 1;
            }
            if let Some((q, l)) = accepted {
                p = q;
                current = finite(l)?;
            }
            result.loss_curve.push(current);
        }

        null = p[..dim].to_vec();
        conv = unpack(&p);
        let eps = guided_eps(den, &z_bar, t, &cond, &null, &conv, cfg.guidance)?;
        z_bar = ddim_step(&z_bar, t, &eps, schedule)?;
        result.null_embeddings[t - 1] = PromptEmbedding { values: null.clone() };
        result.convs[t - 1] = conv.clone();
    }
    result.conv = conv;
    result.reconstruction_error = z_bar.rms_diff(&trajectory[0])?;
    Ok(result)
}

fn finite(v: f64) -> Result<f64, InversionError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(InversionError::NonFiniteLoss)
    }
}

fn central_diff<F>(f: &F, p: &[f64], h: f64) -> Result<Vec<f64>, InversionError>
where
    F: Fn(&[f64]) -> Result<f64, InversionError>,
{
    let mut x = p.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for k in 0..p.len() {
        x[k] = p[k] + h;
        let up = f(&x)?;
        x[k] = p[k] - h;
        let down = f(&x)?;
        x[k] = p[k];
        grad.push(finite((up - down) / (2.0 * h))?);
    }
    Ok(grad)
}
