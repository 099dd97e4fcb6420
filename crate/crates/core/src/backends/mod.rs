//! Provider registry: each operation role is served either by an
//! in-process deterministic stub or by a remote service speaking a small
//! JSON protocol (`POST <endpoint>/invoke`, images as base64 PNG).
//!
//! ```
//! use visprog::backends::{ProviderBinding, Registry, Role};
//!
//! let reg = Registry::stubs()
//!     .register(ProviderBinding::remote(Role::Segmenter, "http://127.0.0.1:9100"))
//!     .unwrap();
//! assert!(reg.binding(Role::Segmenter).is_remote());
//! assert!(!reg.binding(Role::Inpainter).is_remote());
//! ```

pub mod http;
mod protocol;
mod sidecar;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::executor::Value;
use crate::geometry::{inpaint_fill, segment_components_with, GeometryError, ImageBuffer, LabelTable, Mask, Roi};
use crate::inversion::{translate_patch, InversionError, TranslateConfig};
use crate::planner::{
    default_exemplars, enumerate_orderings, llm_plan_request_with_timeout, plan_from_instruction, PlanCandidate, PlanError,
    Provenance, SceneSummary, DEFAULT_ORDERING_LIMIT,
};

pub use http::{invoke_url, DEFAULT_TIMEOUT_MS};
pub use protocol::{image_ref, region_from_parts, ImageSink, ImageSource, RemoteRequest, RemoteResponse};
pub use sidecar::{handle_request, sidecar_router};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prompter,
    Segmenter,
    Inpainter,
    Translator,
    Planner,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Prompter, Role::Segmenter, Role::Inpainter, Role::Translator, Role::Planner];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Prompter => "prompter",
            Role::Segmenter => "segmenter",
            Role::Inpainter => "inpainter",
            Role::Translator => "translator",
            Role::Planner => "planner",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| BackendError::UnknownRole(s.to_string()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("invalid endpoint `{0}`")]
    InvalidEndpoint(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("remote error: {0}")]
    RemoteError(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Stub,
    Remote { endpoint: String, timeout_ms: u64 },
}

impl ProviderKind {
    pub fn is_remote(&self) -> bool {
        matches!(self, ProviderKind::Remote { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderBinding {
    pub role: Role,
    pub kind: ProviderKind,
}

impl ProviderBinding {
    pub fn stub(role: Role) -> Self {
        Self { role, kind: ProviderKind::Stub }
    }

    pub fn remote(role: Role, endpoint: impl Into<String>) -> Self {
        Self { role, kind: ProviderKind::Remote { endpoint: endpoint.into(), timeout_ms: DEFAULT_TIMEOUT_MS } }
    }

    /// Parse `role=url` (or `role=stub`).
    pub fn parse(spec: &str) -> Result<Self, BackendError> {
        let (role, target) = spec
            .split_once('=')
            .ok_or_else(|| BackendError::InvalidEndpoint(format!("expected role=url, got `{spec}`")))?;
        let role: Role = role.trim().parse()?;
        let target = target.trim();
        Ok(if target.eq_ignore_ascii_case("stub") { Self::stub(role) } else { Self::remote(role, target) })
    }
}

/// Immutable set of role bindings plus the settings the stubs need.
#[derive(Clone, Debug, PartialEq)]
pub struct Registry {
    bindings: BTreeMap<Role, ProviderKind>,
    translate: TranslateConfig,
    labels: LabelTable,
}

impl Default for Registry {
    fn default() -> Self {
        Self::stubs()
    }
}

impl Registry {
    /// Every role bound to its in-process stub.
    pub fn stubs() -> Self {
        Self {
            bindings: Role::ALL.into_iter().map(|r| (r, ProviderKind::Stub)).collect(),
            translate: TranslateConfig::default(),
            labels: LabelTable::default(),
        }
    }

    /// New registry with `binding` replacing the previous one for its role.
    pub fn register(&self, binding: ProviderBinding) -> Result<Registry, BackendError> {
        if let ProviderKind::Remote { endpoint, timeout_ms } = &binding.kind {
            let ok = url::Url::parse(endpoint)
                .ok()
                .filter(|u| matches!(u.scheme(), "http" | "https") && u.host().is_some())
                .is_some();
            if !ok || *timeout_ms == 0 {
                return Err(BackendError::InvalidEndpoint(endpoint.clone()));
            }
        }
        let mut next = self.clone();
        next.bindings.insert(binding.role, binding.kind);
        Ok(next)
    }

    pub fn with_translate_config(&self, cfg: TranslateConfig) -> Registry {
        Registry { translate: cfg, ..self.clone() }
    }

    pub fn with_labels(&self, labels: LabelTable) -> Registry {
        Registry { labels, ..self.clone() }
    }

    pub fn binding(&self, role: Role) -> &ProviderKind {
        &self.bindings[&role]
    }

    pub fn translate_config(&self) -> &TranslateConfig {
        &self.translate
    }

    pub fn labels(&self) -> &LabelTable {
        &self.labels
    }

    /// True when no role needs the network.
    pub fn is_all_stub(&self) -> bool {
        self.bindings.values().all(|k| !k.is_remote())
    }
}

/// One provider request.
#[derive(Clone, Debug, PartialEq)]
pub enum ProviderCall {
    /// Describe a whole image.
    Describe(ImageBuffer),
    /// Describe one region.
    DescribeRegion(Roi),
    /// All regions of an image.
    Segment(ImageBuffer),
    Inpaint { image: ImageBuffer, mask: Mask },
    Translate { region: Roi, source: String, target: String, config: TranslateConfig },
}

impl ProviderCall {
    pub fn role(&self) -> Role {
        match self {
            ProviderCall::Describe(_) | ProviderCall::DescribeRegion(_) => Role::Prompter,
            ProviderCall::Segment(_) => Role::Segmenter,
            ProviderCall::Inpaint { .. } => Role::Inpainter,
            ProviderCall::Translate { .. } => Role::Translator,
        }
    }

    pub fn op_name(&self) -> &'static str {
        match self {
            ProviderCall::Describe(_) => "describe",
            ProviderCall::DescribeRegion(_) => "describe_region",
            ProviderCall::Segment(_) => "segment",
            ProviderCall::Inpaint { .. } => "inpaint",
            ProviderCall::Translate { .. } => "translate",
        }
    }

    pub fn to_request(&self) -> RemoteRequest {
        let mut sink = ImageSink::default();
        let args = match self {
            ProviderCall::Describe(img) | ProviderCall::Segment(img) => json!({ "image": sink.image("image", img) }),
            ProviderCall::DescribeRegion(r) => json!({ "region": sink.region("region", r) }),
            ProviderCall::Inpaint { image, mask } => {
                json!({ "image": sink.image("image", image), "mask": sink.mask("mask", mask) })
            }
            ProviderCall::Translate { region, source, target, config } => json!({
                "region": sink.region("region", region),
                "source": source,
                "target": target,
                "config": config,
            }),
        };
        RemoteRequest { role: self.role(), op: self.op_name().into(), args, images: sink.images }
    }

    pub fn from_request(req: &RemoteRequest) -> Result<Self, BackendError> {
        req.validate()?;
        let src = ImageSource { images: &req.images };
        let arg = |name: &str| protocol::field(&req.args, name);
        let text = |name: &str| -> Result<String, BackendError> {
            arg(name)?
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| BackendError::ProtocolError(format!("`{name}` must be a string")))
        };
        let call = match req.op.as_str() {
            "describe" => ProviderCall::Describe(src.image(arg("image")?)?),
            "describe_region" => ProviderCall::DescribeRegion(src.region(arg("region")?)?),
            "segment" => ProviderCall::Segment(src.image(arg("image")?)?),
            "inpaint" => ProviderCall::Inpaint { image: src.image(arg("image")?)?, mask: src.mask(arg("mask")?)? },
            "translate" => ProviderCall::Translate {
                region: src.region(arg("region")?)?,
                source: text("source")?,
                target: text("target")?,
                config: serde_json::from_value(arg("config")?.clone())
                    .map_err(|e| BackendError::ProtocolError(format!("config: {e}")))?,
            },
            other => return Err(BackendError::ProtocolError(format!("unknown op `{other}`"))),
        };
        if call.role() != req.role {
            return Err(BackendError::ProtocolError(format!("op `{}` is not served by role {}", req.op, req.role)));
        }
        Ok(call)
    }
}

/// Dispatch a call to whatever its role is bound to.
pub fn invoke(registry: &Registry, call: &ProviderCall) -> Result<Value, BackendError> {
    match registry.binding(call.role()) {
        ProviderKind::Stub => run_stub(call, registry.labels()),
        ProviderKind::Remote { endpoint, timeout_ms } => invoke_remote(endpoint, *timeout_ms, call),
    }
}

/// One request/response exchange with a remote provider.
pub fn invoke_remote(endpoint: &str, timeout_ms: u64, call: &ProviderCall) -> Result<Value, BackendError> {
    let body = serde_json::to_string(&call.to_request()).expect("request serializes");
    let (status, text) = http::post_json(endpoint, &body, timeout_ms).map_err(BackendError::TransportError)?;
    let resp: RemoteResponse = match serde_json::from_str(&text) {
        Ok(r) => r,
        Err(e) if (200..300).contains(&status) => return Err(BackendError::ProtocolError(e.to_string())),
        Err(_) => return Err(BackendError::TransportError(format!("HTTP {status}"))),
    };
    resp.validate()?;
    if !resp.ok {
        return Err(BackendError::RemoteError(resp.error.unwrap_or_default()));
    }
    let value = ImageSource { images: &resp.images }.value(&resp.result)?;
    expect_kind(call, value)
}

fn expect_kind(call: &ProviderCall, value: Value) -> Result<Value, BackendError> {
    let ok = matches!(
        (call, &value),
        (ProviderCall::Describe(_) | ProviderCall::DescribeRegion(_), Value::Prompt(_))
            | (ProviderCall::Segment(_), Value::RegionList(_))
            | (ProviderCall::Inpaint { .. }, Value::Image(_))
            | (ProviderCall::Translate { .. }, Value::Region(_))
    );
    if ok {
        Ok(value)
    } else {
        Err(BackendError::ProtocolError(format!("`{}` returned a {}", call.op_name(), value.tag())))
    }
}

/// In-process implementations of every role.
pub fn run_stub(call: &ProviderCall, labels: &LabelTable) -> Result<Value, BackendError> {
    Ok(match call {
        ProviderCall::Describe(img) => Value::Prompt(stub_prompter_with(img, labels)),
        ProviderCall::DescribeRegion(r) => Value::Prompt(r.label().to_string()),
        ProviderCall::Segment(img) => Value::RegionList(segment_components_with(img, labels)?),
        ProviderCall::Inpaint { image, mask } => Value::Image(inpaint_fill(image, mask)?),
        ProviderCall::Translate { region, source, target, config } => {
            Value::Region(translate_patch(region, source, target, config)?)
        }
    })
}

/// Template description of the segments, left to right.
pub fn stub_prompter(image: &ImageBuffer) -> String {
    stub_prompter_with(image, &LabelTable::default())
}

pub fn stub_prompter_with(image: &ImageBuffer, labels: &LabelTable) -> String {
    match segment_components_with(image, labels) {
        Ok(rois) => {
            let clauses: Vec<String> = rois
                .iter()
                .map(|r| {
                    let (cx, cy) = r.centroid();
                    format!("{} at ({cx:.1},{cy:.1})", r.label())
                })
                .collect();
            format!("an image containing: {}", clauses.join("; "))
        }
        Err(_) => "an image with a uniform background".to_string(),
    }
}

/// Produce plan candidates with whatever the planner role is bound to.
/// A remote planner's program becomes candidate 0 and its reorderings follow.
pub fn plan_with_registry(
    registry: &Registry,
    instruction: &str,
    scene: &SceneSummary,
) -> Result<Vec<PlanCandidate>, BackendError> {
    match registry.binding(Role::Planner) {
        ProviderKind::Stub => Ok(plan_from_instruction(instruction, scene)?),
        ProviderKind::Remote { endpoint, timeout_ms } => {
            if instruction.trim().is_empty() {
                return Err(PlanError::NoTemplateMatch(instruction.to_string()).into());
            }
            let program = llm_plan_request_with_timeout(instruction, &default_exemplars(), endpoint, *timeout_ms)?;
            let base = PlanCandidate::new(program, Provenance::Llm)?;
            let mut out = vec![base.clone()];
            for p in enumerate_orderings(&base, DEFAULT_ORDERING_LIMIT).into_iter().skip(1) {
                out.push(PlanCandidate::new(p, Provenance::ReorderingOf(0))?);
            }
            Ok(out)
        }
    }
}
