use std::fs;
use std::path::Path;

use serde_json::json;
use thiserror::Error;

use crate::backends::{invoke, BackendError, ProviderCall, Registry};
use crate::dsl::{parse_selector, SelectorError};
use crate::executor::Value;
use crate::geometry::{paste, resolve_selector, GeometryError, ImageBuffer};
use crate::inversion::GuidanceMode;

/// Guidance scales swept by default.
pub const DEFAULT_SWEEP: [f64; 4] = [2.5, 5.0, 7.5, 10.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AblateError {
    #[error("at least one guidance scale is required")]
    EmptySweep,
    #[error("invalid selector: {0}")]
    Selector(#[from] SelectorError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationOutput {
    /// File stem, e.g. `cfg_w7.5` or `in`.
    pub name: String,
    pub mode: GuidanceMode,
    pub image: ImageBuffer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub outputs: Vec<AblationOutput>,
    /// Pairwise RMS between outputs, in 8-bit units over RGB.
    pub rms: Vec<Vec<f64>>,
}

/// RMS difference of the RGB channels of two equally sized images.
pub fn rms(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    assert_eq!(a.dims(), b.dims());
    let (sum, n) = a
        .as_bytes()
        .chunks_exact(4)
        .zip(b.as_bytes().chunks_exact(4))
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] as f64 - q[c] as f64).powi(2)))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    (sum / n as f64).sqrt()
}

/// Translate the selected region once per CFG scale and once with IN
/// guidance, pasting each result back into the image.
pub fn ablate(
    registry: &Registry,
    image: &ImageBuffer,
    selector: &str,
    source: &str,
    target: &str,
    ws: &[f64],
    seed: u64,
) -> Result<AblationReport, AblateError> {
    if ws.is_empty() {
        return Err(AblateError::EmptySweep);
    }
    let selector = parse_selector(selector)?;
    let Value::RegionList(rois) = invoke(registry, &ProviderCall::Segment(image.clone()))? else {
        unreachable!("segmenter results are checked by the backend")
    };
    let roi = resolve_selector(&rois, &selector)?;

    let modes = ws.iter().map(|&w| (format!("cfg_w{w}"), GuidanceMode::Cfg(w))).chain([("in".to_string(), GuidanceMode::In)]);
    let mut outputs = Vec::new();
    for (name, mode) in modes {
        let mut config = registry.translate_config().clone();
        config.mode = mode;
        config.seed = seed;
        let call = ProviderCall::Translate { region: roi.clone(), source: source.into(), target: target.into(), config };
        let Value::Region(out) = invoke(registry, &call)? else {
            unreachable!("translator results are checked by the backend")
        };
        outputs.push(AblationOutput { name, mode, image: paste(image, &out, None)? });
    }
    let rms = outputs.iter().map(|a| outputs.iter().map(|b| rms(&a.image, &b.image)).collect()).collect();
    Ok(AblationReport { outputs, rms })
}

/// Write `<name>.png` per output and `rms.json`.
pub fn write_ablation(report: &AblationReport, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for o in &report.outputs {
        fs::write(dir.join(format!("{}.png", o.name)), o.image.to_png())?;
    }
    let names: Vec<String> = report.outputs.iter().map(|o| format!("{}.png", o.name)).collect();
    let ws: Vec<Option<f64>> = report
        .outputs
        .iter()
        .map(|o| match o.mode {
            GuidanceMode::Cfg(w) => Some(w),
            GuidanceMode::In => None,
        })
        .collect();
    let table = json!({ "outputs": names, "w": ws, "rms": report.rms });
    fs::write(dir.join("rms.json"), serde_json::to_string_pretty(&table).expect("table serializes") + "\n")
}
