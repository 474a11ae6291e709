//! JSON-lines transform sidecars written next to augmented inputs.
//!
//! One object per line:
//! `{"index":0,"rotation_deg":0.0,"hflip":false,"noise_sigma":0.0,"noise_seed":123,"order":"rotate,flip,noise"}`

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tta::TransformSpec;

pub const TRANSFORM_ORDER: &str = "rotate,flip,noise";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub index: usize,
    pub rotation_deg: f64,
    pub hflip: bool,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    #[serde(default = "default_order")]
    pub order: String,
}

fn default_order() -> String {
    TRANSFORM_ORDER.to_string()
}

impl SidecarRecord {
    pub fn new(index: usize, spec: &TransformSpec) -> Self {
        Self {
            index,
            rotation_deg: spec.rotation_deg,
            hflip: spec.hflip,
            noise_sigma: spec.noise_sigma,
            noise_seed: spec.noise_seed,
            order: default_order(),
        }
    }

    pub fn spec(&self) -> TransformSpec {
        TransformSpec {
            rotation_deg: self.rotation_deg,
            hflip: self.hflip,
            noise_sigma: self.noise_sigma,
            noise_seed: self.noise_seed,
        }
    }
}

pub fn write_sidecar(path: impl AsRef<Path>, specs: &[TransformSpec]) -> Result<()> {
    let mut out = String::new();
    for (index, spec) in specs.iter().enumerate() {
        out.push_str(&serde_json::to_string(&SidecarRecord::new(index, spec))?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a sidecar; records must be numbered `0..n` in order and use the
/// supported transform order.
pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Vec<SidecarRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message,
        };
        let record: SidecarRecord = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if record.index != records.len() {
            return Err(parse_err(format!("expected index {}, found {}", records.len(), record.index)));
        }
        if record.order != TRANSFORM_ORDER {
            return Err(parse_err(format!("unsupported transform order `{}`", record.order)));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Empty("sidecar has no records"));
    }
    Ok(records)
}
