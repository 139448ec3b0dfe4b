//! Shared output helpers: float formatting and metadata headers.

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Locale-free float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Provenance block embedded in every artifact.
#[derive(Clone, Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub flags: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, flags: serde_json::Value) -> Self {
        Self {
            tool: "iqo".to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            flags,
        }
    }

    /// `# {json}` comment line for CSV headers.
    pub fn csv_comment(&self) -> String {
        format!("# {}", serde_json::to_string(self).expect("metadata serializes"))
    }
}
