use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{ImageBuffer, Roi};
use crate::inversion::fnv64;

/// Runtime value bound to a program variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Image(ImageBuffer),
    Region(Roi),
    Prompt(String),
    Number(f64),
    RegionList(Vec<Roi>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Image,
    Region,
    Prompt,
    Number,
    RegionList,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Image => "image",
            Tag::Region => "region",
            Tag::Prompt => "prompt",
            Tag::Number => "number",
            Tag::RegionList => "region_list",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Value {
    pub fn tag(&self) -> Tag {
        match self {
            Value::Image(_) => Tag::Image,
            Value::Region(_) => Tag::Region,
            Value::Prompt(_) => Tag::Prompt,
            Value::Number(_) => Tag::Number,
            Value::RegionList(_) => Tag::RegionList,
        }
    }

    /// FNV-1a 64 over a canonical byte encoding (tag byte first).
    pub fn digest(&self) -> u64 {
        let mut buf = Vec::new();
        self.encode(&mut buf);
        fnv64(&buf)
    }

    fn encode(&self, buf: &mut Vec<u8>) {
        buf.push(self.tag() as u8);
        match self {
            Value::Image(img) => encode_image(img, buf),
            Value::Region(r) => encode_region(r, buf),
            Value::Prompt(s) => encode_str(s, buf),
            Value::Number(v) => buf.extend(v.to_bits().to_le_bytes()),
            Value::RegionList(rs) => {
                buf.extend((rs.len() as u64).to_le_bytes());
                rs.iter().for_each(|r| encode_region(r, buf));
            }
        }
    }

    pub fn as_image(&self) -> Option<&ImageBuffer> {
        match self {
            Value::Image(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_region(&self) -> Option<&Roi> {
        match self {
            Value::Region(r) => Some(r),
            _ => None,
        }
    }
}

fn encode_str(s: &str, buf: &mut Vec<u8>) {
    buf.extend((s.len() as u64).to_le_bytes());
    buf.extend(s.as_bytes());
}

fn encode_image(img: &ImageBuffer, buf: &mut Vec<u8>) {
    buf.extend(img.width().to_le_bytes());
    buf.extend(img.height().to_le_bytes());
    buf.extend(img.as_bytes());
}

fn encode_region(r: &Roi, buf: &mut Vec<u8>) {
    encode_str(r.label(), buf);
    let (w, h) = r.frame();
    buf.extend(w.to_le_bytes());
    buf.extend(h.to_le_bytes());
    let mut byte = 0u8;
    let mut nbits = 0;
    for y in 0..h {
        for x in 0..w {
            byte = (byte << 1) | r.mask().get(x, y) as u8;
            nbits += 1;
            if nbits == 8 {
                buf.push(byte);
                byte = 0;
                nbits = 0;
            }
        }
    }
    if nbits > 0 {
        buf.push(byte << (8 - nbits));
    }
    encode_image(r.patch(), buf);
}

/// Digest as 16 lowercase hex digits.
pub fn hex_digest(d: u64) -> String {
    format!("{d:016x}")
}
