//! Canonical JSON, Graphviz DOT and a static SVG fish-bone layout.

mod dot;
mod svg;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::fishbone::FishboneDiagram;

pub use dot::to_dot;
pub use svg::to_svg;

pub const SCHEMA: &str = "fishbone/1";
pub const MIN_LABEL_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid render options: {0}")]
    InvalidOptions(String),
    #[error("not a fish-bone document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema {0:?}, expected {SCHEMA:?}")]
    Schema(String),
    #[error("unknown format {0:?}; expected json, dot or svg")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Json,
    Dot,
    Svg,
}

impl RenderFormat {
    pub const ALL: [RenderFormat; 3] = [RenderFormat::Json, RenderFormat::Dot, RenderFormat::Svg];

    pub fn extension(self) -> &'static str {
        match self {
            RenderFormat::Json => "json",
            RenderFormat::Dot => "dot",
            RenderFormat::Svg => "svg",
        }
    }
}

impl fmt::Display for RenderFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for RenderFormat {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(RenderFormat::Json),
            "dot" => Ok(RenderFormat::Dot),
            "svg" => Ok(RenderFormat::Svg),
            _ => Err(RenderError::UnknownFormat(s.to_string())),
        }
    }
}

fn default_width() -> f64 {
    1200.0
}
fn default_height() -> f64 {
    800.0
}
fn default_font_size() -> f64 {
    12.0
}
fn default_max_label_len() -> usize {
    48
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default = "default_font_size")]
    pub font_size: f64,
    /// Labels longer than this many characters are cut and end in `…`.
    #[serde(default = "default_max_label_len")]
    pub max_label_len: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width: default_width(),
            height: default_height(),
            font_size: default_font_size(),
            max_label_len: default_max_label_len(),
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<(), RenderError> {
        for (name, v) in [
            ("width", self.width),
            ("height", self.height),
            ("font_size", self.font_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RenderError::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_label_len < MIN_LABEL_LEN {
            return Err(RenderError::InvalidOptions(format!(
                "max_label_len must be at least {MIN_LABEL_LEN}, got {}",
                self.max_label_len
            )));
        }
        Ok(())
    }
}

/// Cuts `text` to at most `max` characters, the last being `…` when cut.
pub fn ellipsize(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut out: String = text.chars().take(max.saturating_sub(1)).collect();
    out.push('…');
    out
}

/// Pretty-printed JSON with sorted keys, a `schema` field and a trailing
/// newline.
pub fn to_json(d: &FishboneDiagram) -> String {
    let mut value = serde_json::to_value(d).expect("diagram serializes");
    value
        .as_object_mut()
        .expect("diagram is an object")
        .insert("schema".into(), Value::String(SCHEMA.into()));
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<FishboneDiagram, RenderError> {
    let mut value: Value = serde_json::from_str(text)?;
    let schema = value
        .as_object_mut()
        .and_then(|o| o.remove("schema"))
        .and_then(|s| s.as_str().map(str::to_string))
        .unwrap_or_default();
    if schema != SCHEMA {
        return Err(RenderError::Schema(schema));
    }
    Ok(serde_json::from_value(value)?)
}

pub fn render(d: &FishboneDiagram, format: RenderFormat, opts: &RenderOptions) -> Result<String, RenderError> {
    match format {
        RenderFormat::Json => Ok(to_json(d)),
        RenderFormat::Dot => Ok(to_dot(d)),
        RenderFormat::Svg => to_svg(d, opts),
    }
}
