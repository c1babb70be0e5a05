//! The numbered inventory of visible interactive elements on a page and its
//! JSON wire format.
//!
//! Wire shape (field names are fixed):
//!
//! ```json
//! {"url":"…","captured_at":"…","elements":[
//!   {"number":1,"role":"button","text":"Go",
//!    "rect":{"x":0,"y":0,"width":10,"height":10},"selector":"#go"}]}
//! ```

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::num::NonZeroU32;

use serde::{Deserialize, Serialize, Serializer};

use crate::contract::MAX_TEXT_CHARS;

/// A label number as drawn on the page. Labels start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelNumber(NonZeroU32);

impl LabelNumber {
    pub const fn new(n: u32) -> Option<Self> {
        match NonZeroU32::new(n) {
            Some(v) => Some(Self(v)),
            None => None,
        }
    }

    pub const fn get(self) -> u32 {
        self.0.get()
    }
}

impl fmt::Display for LabelNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bounding box in CSS pixels, relative to the viewport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    #[serde(serialize_with = "css_px")]
    pub x: f64,
    #[serde(serialize_with = "css_px")]
    pub y: f64,
    #[serde(serialize_with = "css_px")]
    pub width: f64,
    #[serde(serialize_with = "css_px")]
    pub height: f64,
}

impl Rect {
    pub fn has_area(&self) -> bool {
        self.width > 0.0 && self.height > 0.0
    }
}

/// Whole pixel values are written as integers, matching `JSON.stringify`.
fn css_px<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    const EXACT: f64 = 9_007_199_254_740_992.0;
    if *v > -EXACT && *v < EXACT && (*v as i64) as f64 == *v {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledElement {
    pub number: LabelNumber,
    /// ARIA role if present, otherwise the lowercase tag name.
    pub role: String,
    pub text: String,
    pub rect: Rect,
    pub selector: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub url: String,
    /// RFC 3339 UTC timestamp.
    pub captured_at: String,
    pub elements: Vec<LabeledElement>,
}

impl LabelMap {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn lookup(&self, n: u32) -> Option<&LabeledElement> {
        lookup(self, n)
    }

    /// Wire-format JSON, compact.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("label map serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("malformed label map JSON: {0}")]
    MalformedJson(String),
    #[error("label {0} appears more than once")]
    DuplicateNumber(u64),
    #[error("label numbers are not contiguous from 1 (found {found}, expected {expected})")]
    GapInNumbering { found: u64, expected: u64 },
    #[error("labels are not in document order at position {0}")]
    OutOfOrder(usize),
    #[error("label {0} has a zero-area rect")]
    ZeroAreaRect(u64),
    #[error("label {0} text exceeds {MAX_TEXT_CHARS} characters")]
    TextTooLong(u64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMap {
    url: String,
    captured_at: String,
    elements: Vec<WireElement>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireElement {
    number: u64,
    role: String,
    text: String,
    rect: Rect,
    selector: String,
}

/// Parses and validates label-map JSON produced by the injected labeler or
/// the extension.
pub fn parse_label_map(json: &str) -> Result<LabelMap, MapError> {
    let wire: WireMap =
        serde_json::from_str(json).map_err(|e| MapError::MalformedJson(e.to_string()))?;
    chrono::DateTime::parse_from_rfc3339(&wire.captured_at).map_err(|e| {
        MapError::MalformedJson(alloc::format!("captured_at {:?}: {e}", wire.captured_at))
    })?;

    let mut seen = BTreeMap::new();
    for (i, el) in wire.elements.iter().enumerate() {
        if seen.insert(el.number, i).is_some() {
            return Err(MapError::DuplicateNumber(el.number));
        }
    }
    let total = wire.elements.len() as u64;
    for (expected, &found) in (1..=total).zip(seen.keys()) {
        if found != expected {
            return Err(MapError::GapInNumbering { found, expected });
        }
    }

    let mut elements = Vec::with_capacity(wire.elements.len());
    for (i, el) in wire.elements.into_iter().enumerate() {
        if el.number != i as u64 + 1 {
            return Err(MapError::OutOfOrder(i));
        }
        if !(el.rect.has_area() && el.rect.width.is_finite() && el.rect.height.is_finite()) {
            return Err(MapError::ZeroAreaRect(el.number));
        }
        if el.text.chars().count() > MAX_TEXT_CHARS {
            return Err(MapError::TextTooLong(el.number));
        }
        let number = u32::try_from(el.number)
            .ok()
            .and_then(LabelNumber::new)
            .ok_or(MapError::GapInNumbering {
                found: el.number,
                expected: i as u64 + 1,
            })?;
        elements.push(LabeledElement {
            number,
            role: el.role,
            text: el.text,
            rect: el.rect,
            selector: el.selector,
        });
    }

    Ok(LabelMap {
        url: wire.url,
        captured_at: wire.captured_at,
        elements,
    })
}

pub fn lookup(m: &LabelMap, n: u32) -> Option<&LabeledElement> {
    let idx = usize::try_from(n).ok()?.checked_sub(1)?;
    m.elements.get(idx)
}

/// Structural change between two perceptions of a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MapDiff {
    pub added: u32,
    pub removed: u32,
    pub url_changed: bool,
}

impl MapDiff {
    pub fn is_unchanged(&self) -> bool {
        *self == MapDiff::default()
    }
}

/// Counts elements added and removed, matching on `(selector, role)` as a
/// multiset.
pub fn diff_maps(before: &LabelMap, after: &LabelMap) -> MapDiff {
    let mut balance: BTreeMap<(&str, &str), i64> = BTreeMap::new();
    for el in &before.elements {
        *balance.entry((&el.selector, &el.role)).or_default() -= 1;
    }
    for el in &after.elements {
        *balance.entry((&el.selector, &el.role)).or_default() += 1;
    }
    let (mut added, mut removed) = (0u32, 0u32);
    for v in balance.values() {
        if *v > 0 {
            added += *v as u32;
        } else {
            removed += v.unsigned_abs() as u32;
        }
    }
    MapDiff {
        added,
        removed,
        url_changed: before.url != after.url,
    }
}
