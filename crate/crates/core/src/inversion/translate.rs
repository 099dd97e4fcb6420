use serde::{Deserialize, Serialize};

use super::{
    ddim_invert, embed_prompt, make_schedule, null_text_optimize, sample, GuidanceMode, InversionError,
    NullTextConfig, ToyDenoiser,
};
use crate::geometry::{round_half_up, ImageBuffer, Roi};
use crate::guidance::NoiseTensor;

/// Settings of the patch translation pipeline; serialized with the
/// config-file keys `T`, `N`, `eta`, `beta`, `mode`, `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateConfig {
    #[serde(rename = "T")]
    pub steps: usize,
    #[serde(rename = "N")]
    pub inner_steps: usize,
    pub eta: f64,
    pub beta: (f64, f64),
    pub mode: GuidanceMode,
    pub seed: u64,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        Self { steps: 10, inner_steps: 10, eta: 1e-2, beta: (1e-4, 0.02), mode: GuidanceMode::In, seed: 0 }
    }
}

impl TranslateConfig {
    /// 50 sampling steps.
    pub fn full_length() -> Self {
        Self { steps: 50, ..Self::default() }
    }

    pub fn null_text(&self) -> NullTextConfig {
        NullTextConfig { inner_steps: self.inner_steps, step_size: self.eta, guidance: self.mode, ..NullTextConfig::default() }
    }
}

/// Translated region plus optimization diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslateReport {
    pub roi: Roi,
    pub reconstruction_error: f64,
    pub backtracks: usize,
    pub loss_curve: Vec<f64>,
}

/// RGB of `patch` as a 1×3×H×W tensor in [−1, 1].
pub fn patch_to_tensor(patch: &ImageBuffer) -> NoiseTensor<f64> {
    let (w, h) = patch.dims();
    let (w, h) = (w as usize, h as usize);
    let mut values = vec![0.0; 3 * w * h];
    for y in 0..h {
        for x in 0..w {
            let px = patch.get(x as u32, y as u32);
            for c in 0..3 {
                values[c * w * h + y * w + x] = px[c] as f64 / 127.5 - 1.0;
            }
        }
    }
    NoiseTensor::from_vec((1, 3, h, w), values).expect("patch is non-empty")
}

/// Inverse of [`patch_to_tensor`] with round-half-up and clamping; alpha 255.
pub fn tensor_to_patch(t: &NoiseTensor<f64>) -> Result<ImageBuffer, InversionError> {
    let (n, c, h, w) = t.shape();
    if n != 1 || c != 3 {
        return Err(InversionError::ShapeMismatch(format!("expected 1x3xHxW, got {:?}", t.shape())));
    }
    let a = t.array();
    let mut out = ImageBuffer::filled(w as u32, h as u32, [0, 0, 0, 255])?;
    let q = |v: f64| round_half_up((v + 1.0) * 127.5).clamp(0, 255) as u8;
    for y in 0..h {
        for x in 0..w {
            out.set(x as u32, y as u32, [q(a[[0, 0, y, x]]), q(a[[0, 1, y, x]]), q(a[[0, 2, y, x]]), 255]);
        }
    }
    Ok(out)
}

/// Invert the region's pixels under the source prompt, fit null embeddings,
/// and resample under the target prompt. Geometry is untouched; only RGB on
/// mask pixels changes.
pub fn translate_patch(roi: &Roi, source: &str, target: &str, cfg: &TranslateConfig) -> Result<Roi, InversionError> {
    translate_patch_report(roi, source, target, cfg).map(|r| r.roi)
}

pub fn translate_patch_report(
    roi: &Roi,
    source: &str,
    target: &str,
    cfg: &TranslateConfig,
) -> Result<TranslateReport, InversionError> {
    let schedule = make_schedule(cfg.steps, cfg.beta.0, cfg.beta.1)?;
    let z0 = patch_to_tensor(roi.patch());
    let (_, c, h, w) = z0.shape();
    let den = ToyDenoiser::new(cfg.seed, cfg.steps, (c, h, w));
    let src = embed_prompt(source);
    let inv = ddim_invert(&z0, &src, &den, &schedule)?;
    let nulls = null_text_optimize(&inv.latents, &src, &den, &schedule, &cfg.null_text())?;
    let out = sample(&inv.latents[cfg.steps], &embed_prompt(target), &nulls, &den, &schedule, cfg.mode)?;
    let roi = roi.with_patch(&tensor_to_patch(&out)?)?;
    Ok(TranslateReport {
        roi,
        reconstruction_error: nulls.reconstruction_error,
        backtracks: nulls.backtracks,
        loss_curve: nulls.loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Mask;

    fn gradient_roi() -> Roi {
        let mut img = ImageBuffer::filled(20, 20, [0, 0, 0, 255]).unwrap();
        let mut m = Mask::new(20, 20);
        for y in 4..14 {
            for x in 5..15 {
                img.set(x, y, [(x * 20) as u8, (y * 15) as u8, 90, 255]);
                if (x + y) % 7 != 0 {
                    m.set(x, y, true);
                }
            }
        }
        Roi::from_mask(&img, m, "dog").unwrap()
    }

    #[test]
    fn config_uses_file_keys() {
        let json = serde_json::to_value(TranslateConfig::default()).unwrap();
        assert_eq!(json, serde_json::json!({"T": 10, "N": 10, "eta": 0.01, "beta": [0.0001, 0.02], "mode": "IN", "seed": 0}));
        let cfg: TranslateConfig = serde_json::from_str(r#"{"T":5,"N":2,"eta":0.1,"beta":[0.001,0.01],"mode":{"CFG":7.5},"seed":3}"#).unwrap();
        assert_eq!(cfg.mode, GuidanceMode::Cfg(7.5));
        assert_eq!(TranslateConfig::full_length().steps, 50);
    }

    #[test]
    fn tensor_patch_round_trip() {
        let roi = gradient_roi();
        assert_eq!(&tensor_to_patch(&patch_to_tensor(roi.patch())).unwrap().get(1, 1), &roi.patch().get(1, 1));
    }

    #[test]
    fn same_prompt_reconstructs() {
        let roi = gradient_roi();
        let out = translate_patch(&roi, "dog", "dog", &TranslateConfig::default()).unwrap();
        assert_eq!(out.mask(), roi.mask());
        assert_eq!(out.bbox(), roi.bbox());
        assert_eq!(out.centroid(), roi.centroid());
        for ((_, _, a), (_, _, b)) in out.pixels().zip(roi.pixels()) {
            for c in 0..3 {
                assert!((a[c] as i32 - b[c] as i32).abs() <= 2, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn other_prompt_changes_colors_deterministically() {
        let roi = gradient_roi();
        let cfg = TranslateConfig::default();
        let a = translate_patch(&roi, "dog", "sheep", &cfg).unwrap();
        assert_eq!(a, translate_patch(&roi, "dog", "sheep", &cfg).unwrap());
        assert_ne!(a.patch(), roi.patch());
        assert_eq!(a.mask(), roi.mask());
    }
}
