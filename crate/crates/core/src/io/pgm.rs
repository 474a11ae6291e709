//! Grayscale (binary PGM, `P5`, maxval 255) renders of uncertainty maps.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::grid::UncertaintyMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Map the image's own `[min, max]` to `[0, 255]`; a constant image is black.
    PerImage,
    /// Map `[0, max]` to `[0, 255]`, e.g. a metric's theoretical maximum.
    FixedRange { max: f64 },
}

pub fn render_pgm(umap: &UncertaintyMap, normalization: Normalization) -> Vec<u8> {
    let values = umap.values();
    let (lo, hi) = match normalization {
        Normalization::PerImage => (
            values.iter().copied().fold(f64::INFINITY, f64::min),
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ),
        Normalization::FixedRange { max } => (0.0, max),
    };
    let span = hi - lo;

    let mut out = format!("P5\n{} {}\n255\n", umap.width(), umap.height()).into_bytes();
    out.extend(values.iter().map(|&v| {
        if span > 0.0 {
            (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

pub fn write_pgm(path: impl AsRef<Path>, umap: &UncertaintyMap, normalization: Normalization) -> Result<()> {
    fs::write(path, render_pgm(umap, normalization))?;
    Ok(())
}
