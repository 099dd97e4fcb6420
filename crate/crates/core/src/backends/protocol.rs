use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::{BackendError, Role};
use crate::executor::Value;
use crate::geometry::{ImageBuffer, Mask, Roi};

/// `/invoke` request body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteRequest {
    pub role: Role,
    pub op: String,
    pub args: Json,
    #[serde(default)]
    pub images: BTreeMap<String, String>,
}

/// `/invoke` response body. Exactly one of `ok == true` and `error` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteResponse {
    pub ok: bool,
    #[serde(default)]
    pub result: Json,
    #[serde(default)]
    pub images: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RemoteRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        check_refs(&self.args, &self.images)
    }
}

impl RemoteResponse {
    pub fn success(result: Json, images: BTreeMap<String, String>) -> Self {
        Self { ok: true, result, images, error: None }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self { ok: false, result: Json::Null, images: BTreeMap::new(), error: Some(message.into()) }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.ok == self.error.is_some() {
            return Err(BackendError::ProtocolError("exactly one of ok=true or error must be present".into()));
        }
        check_refs(&self.result, &self.images)
    }
}

/// `{"image_ref": key}` marks a value carried in the image map.
pub fn image_ref(key: &str) -> Json {
    json!({ "image_ref": key })
}

fn ref_key(v: &Json) -> Option<&str> {
    match v {
        Json::Object(m) if m.len() == 1 => m.get("image_ref").and_then(Json::as_str),
        _ => None,
    }
}

fn check_refs(v: &Json, images: &BTreeMap<String, String>) -> Result<(), BackendError> {
    if let Some(key) = ref_key(v) {
        return if images.contains_key(key) {
            Ok(())
        } else {
            Err(BackendError::ProtocolError(format!("image `{key}` referenced but not supplied")))
        };
    }
    match v {
        Json::Array(items) => items.iter().try_for_each(|x| check_refs(x, images)),
        Json::Object(m) => m.values().try_for_each(|x| check_refs(x, images)),
        _ => Ok(()),
    }
}

/// Collects images while building a message.
#[derive(Default)]
pub struct ImageSink {
    pub images: BTreeMap<String, String>,
}

impl ImageSink {
    pub fn image(&mut self, key: &str, img: &ImageBuffer) -> Json {
        self.images.insert(key.to_string(), STANDARD.encode(img.to_png()));
        image_ref(key)
    }

    pub fn mask(&mut self, key: &str, mask: &Mask) -> Json {
        self.images.insert(key.to_string(), STANDARD.encode(mask.to_png()));
        image_ref(key)
    }

    /// Region as `{label, mask, patch}`; the bbox follows from the mask.
    pub fn region(&mut self, key: &str, roi: &Roi) -> Json {
        json!({
            "label": roi.label(),
            "mask": self.mask(&format!("{key}.mask"), roi.mask()),
            "patch": self.image(&format!("{key}.patch"), roi.patch()),
        })
    }

    pub fn value(&mut self, key: &str, value: &Value) -> Json {
        match value {
            Value::Image(img) => json!({ "image": self.image(key, img) }),
            Value::Region(r) => json!({ "region": self.region(key, r) }),
            Value::Prompt(s) => json!({ "text": s }),
            Value::Number(n) => json!({ "number": n }),
            Value::RegionList(rs) => {
                let items: Vec<Json> = rs.iter().enumerate().map(|(i, r)| self.region(&format!("{key}.{i}"), r)).collect();
                json!({ "regions": items })
            }
        }
    }
}

/// Reads values back out of a message's image map.
pub struct ImageSource<'a> {
    pub images: &'a BTreeMap<String, String>,
}

impl ImageSource<'_> {
    fn bytes(&self, v: &Json) -> Result<Vec<u8>, BackendError> {
        let key = ref_key(v).ok_or_else(|| BackendError::ProtocolError(format!("expected image_ref, got {v}")))?;
        let b64 = self
            .images
            .get(key)
            .ok_or_else(|| BackendError::ProtocolError(format!("image `{key}` not supplied")))?;
        STANDARD.decode(b64).map_err(|e| BackendError::ProtocolError(format!("image `{key}`: {e}")))
    }

    pub fn image(&self, v: &Json) -> Result<ImageBuffer, BackendError> {
        ImageBuffer::from_png(&self.bytes(v)?).map_err(|e| BackendError::ProtocolError(e.to_string()))
    }

    pub fn mask(&self, v: &Json) -> Result<Mask, BackendError> {
        Mask::from_png(&self.bytes(v)?).map_err(|e| BackendError::ProtocolError(e.to_string()))
    }

    pub fn region(&self, v: &Json) -> Result<Roi, BackendError> {
        let label = field(v, "label")?
            .as_str()
            .ok_or_else(|| BackendError::ProtocolError("region label must be a string".into()))?;
        let mask = self.mask(field(v, "mask")?)?;
        let patch = self.image(field(v, "patch")?)?;
        region_from_parts(&mask, &patch, label)
    }

    pub fn value(&self, v: &Json) -> Result<Value, BackendError> {
        let obj = v.as_object().filter(|m| m.len() == 1).ok_or_else(|| {
            BackendError::ProtocolError(format!("result must be a single-key object, got {v}"))
        })?;
        let (tag, payload) = obj.iter().next().unwrap();
        let bad = || BackendError::ProtocolError(format!("malformed `{tag}` result"));
        match tag.as_str() {
            "image" => Ok(Value::Image(self.image(payload)?)),
            "region" => Ok(Value::Region(self.region(payload)?)),
            "text" => Ok(Value::Prompt(payload.as_str().ok_or_else(bad)?.to_string())),
            "number" => Ok(Value::Number(payload.as_f64().ok_or_else(bad)?)),
            "regions" => {
                let items = payload.as_array().ok_or_else(bad)?;
                Ok(Value::RegionList(items.iter().map(|r| self.region(r)).collect::<Result<_, _>>()?))
            }
            other => Err(BackendError::ProtocolError(format!("unknown result kind `{other}`"))),
        }
    }
}

pub(crate) fn field<'a>(v: &'a Json, name: &str) -> Result<&'a Json, BackendError> {
    v.get(name).ok_or_else(|| BackendError::ProtocolError(format!("missing field `{name}`")))
}

/// Rebuild a region from its full-frame mask and bbox-sized patch.
pub fn region_from_parts(mask: &Mask, patch: &ImageBuffer, label: &str) -> Result<Roi, BackendError> {
    let pts: Vec<(u32, u32)> = mask.iter_set().collect();
    if pts.is_empty() {
        return Err(BackendError::ProtocolError("region mask is empty".into()));
    }
    let x0 = pts.iter().map(|p| p.0).min().unwrap();
    let y0 = pts.iter().map(|p| p.1).min().unwrap();
    let x1 = pts.iter().map(|p| p.0).max().unwrap();
    let y1 = pts.iter().map(|p| p.1).max().unwrap();
    if patch.dims() != (x1 - x0 + 1, y1 - y0 + 1) {
        return Err(BackendError::ProtocolError(format!(
            "patch {:?} does not match mask extent {:?}",
            patch.dims(),
            (x1 - x0 + 1, y1 - y0 + 1)
        )));
    }
    let (w, h) = mask.dims();
    Roi::from_pixels(w, h, label, pts.into_iter().map(|(x, y)| (x, y, patch.get(x - x0, y - y0))))
        .map_err(|e| BackendError::ProtocolError(e.to_string()))
}
