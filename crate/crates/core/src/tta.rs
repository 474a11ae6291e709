//! Test-time augmentation: draw transforms, apply them to an input image,
//! and bring the model's predictions on augmented inputs back into the
//! original frame so they can be stacked pixel-for-pixel.
//!
//! A transform is applied as rotate (about the image centre, bilinear,
//! zero fill) → horizontal flip → additive Gaussian noise. Inversion undoes
//! the flip and then the rotation; noise has no inverse.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{clamp_unit, ProbabilityMap, SampleStack};

/// Samples drawn per image by default.
pub const DEFAULT_SAMPLES: usize = 50;

/// Grayscale input intensities, any finite range.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl InputImage {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Empty("image must have at least one pixel"));
        }
        if values.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: (height, width),
                found: (values.len() / width, width),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPixel {
                index,
                value: values[index],
                reason: "image intensity must be finite",
            });
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max - min` of the intensities, or 1 for a constant image.
    pub fn intensity_range(&self) -> f64 {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            max - min
        } else {
            1.0
        }
    }
}

impl From<&ProbabilityMap> for InputImage {
    fn from(map: &ProbabilityMap) -> Self {
        Self {
            height: map.height(),
            width: map.width(),
            values: map.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub rotation_deg: f64,
    pub hflip: bool,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl TransformSpec {
    pub const IDENTITY: TransformSpec = TransformSpec {
        rotation_deg: 0.0,
        hflip: false,
        noise_sigma: 0.0,
        noise_seed: 0,
    };

    pub fn is_geometric_identity(&self) -> bool {
        self.rotation_deg == 0.0 && !self.hflip
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationConfig {
    /// Rotations are drawn uniformly from `[-max, max]` degrees.
    pub max_rotation_deg: f64,
    pub flip_probability: f64,
    /// Absolute noise standard deviation.
    pub noise_sigma: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            max_rotation_deg: 20.0,
            flip_probability: 0.5,
            noise_sigma: 0.01,
        }
    }
}

impl AugmentationConfig {
    /// Default config with noise scaled to 1% of the image's intensity range.
    pub fn for_image(image: &InputImage) -> Self {
        let default = Self::default();
        Self {
            noise_sigma: default.noise_sigma * image.intensity_range(),
            ..default
        }
    }
}

/// Draws `count` transforms. The first is always the identity so the
/// unaugmented prediction is part of every stack. Each transform has its
/// own random stream derived from `seed`, so the list is independent of
/// evaluation order.
pub fn sample_transforms(count: usize, seed: u64, config: &AugmentationConfig) -> Vec<TransformSpec> {
    let max = config.max_rotation_deg.abs();
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            if k == 0 {
                return TransformSpec {
                    noise_seed: rng.next_u64(),
                    ..TransformSpec::IDENTITY
                };
            }
            let rotation_deg = if max > 0.0 { rng.random_range(-max..=max) } else { 0.0 };
            let hflip = rng.random_bool(config.flip_probability.clamp(0.0, 1.0));
            TransformSpec {
                rotation_deg,
                hflip,
                noise_sigma: config.noise_sigma,
                noise_seed: rng.next_u64(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

/// Zero outside the grid.
fn fetch(values: &[f64], height: usize, width: usize, row: isize, col: isize) -> f64 {
    if row < 0 || col < 0 || row as usize >= height || col as usize >= width {
        0.0
    } else {
        values[row as usize * width + col as usize]
    }
}

/// Rotates a row-major plane by `degrees` about its centre. Output pixel
/// `p` samples the input at `c + R(-θ)(p - c)`; samples falling outside the
/// grid read as zero.
pub fn rotate_plane(values: &[f64], height: usize, width: usize, degrees: f64, interpolation: Interpolation) -> Vec<f64> {
    if degrees == 0.0 {
        return values.to_vec();
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(values.len());
    for row in 0..height {
        let dy = row as f64 - cy;
        for col in 0..width {
            let dx = col as f64 - cx;
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            let v = match interpolation {
                Interpolation::Nearest => fetch(values, height, width, sy.round() as isize, sx.round() as isize),
                Interpolation::Bilinear => {
                    let x0 = sx.floor();
                    let y0 = sy.floor();
                    let fx = sx - x0;
                    let fy = sy - y0;
                    let (x0, y0) = (x0 as isize, y0 as isize);
                    let top = fetch(values, height, width, y0, x0) * (1.0 - fx) + fetch(values, height, width, y0, x0 + 1) * fx;
                    let bottom = fetch(values, height, width, y0 + 1, x0) * (1.0 - fx)
                        + fetch(values, height, width, y0 + 1, x0 + 1) * fx;
                    top * (1.0 - fy) + bottom * fy
                }
            };
            out.push(v);
        }
    }
    out
}

/// Mirrors each row left-to-right.
pub fn flip_plane(values: &[f64], width: usize) -> Vec<f64> {
    values
        .chunks(width)
        .flat_map(|row| row.iter().rev().copied())
        .collect()
}

pub fn apply_transform(image: &InputImage, spec: &TransformSpec) -> InputImage {
    let (height, width) = image.dims();
    let mut values = rotate_plane(&image.values, height, width, spec.rotation_deg, Interpolation::Bilinear);
    if spec.hflip {
        values = flip_plane(&values, width);
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma is positive and finite");
        let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    InputImage { height, width, values }
}

/// Maps a prediction on an augmented input back to the original frame.
pub fn invert_prediction(pred: &ProbabilityMap, spec: &TransformSpec) -> ProbabilityMap {
    let (height, width) = pred.dims();
    let mut values = pred.values().to_vec();
    if spec.hflip {
        values = flip_plane(&values, width);
    }
    let values = rotate_plane(&values, height, width, -spec.rotation_deg, Interpolation::Bilinear);
    let mut values = values.into_iter();
    ProbabilityMap::from_fn(height, width, |_, _| clamp_unit(values.next().unwrap_or(0.0)))
}

/// Inverse-aligns every prediction and stacks them in input order.
pub fn assemble_stack(preds: &[(ProbabilityMap, TransformSpec)]) -> Result<SampleStack> {
    let samples = preds
        .iter()
        .map(|(pred, spec)| invert_prediction(pred, spec))
        .collect();
    SampleStack::new(samples)
}

/// Gaussian blob `exp(-r² / 2σ²)` centred at `(cx, cy)`; a smooth analytic
/// map for round-trip measurements.
pub fn gaussian_blob(height: usize, width: usize, cx: f64, cy: f64, sigma: f64) -> ProbabilityMap {
    ProbabilityMap::from_fn(height, width, |row, col| {
        let dx = col as f64 - cx;
        let dy = row as f64 - cy;
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    })
}

/// Mean absolute error between `map` and its rotate-then-unrotate round
/// trip, over pixels at least `margin` away from every border.
pub fn rotation_round_trip_error(map: &ProbabilityMap, degrees: f64, interpolation: Interpolation, margin: usize) -> f64 {
    let (height, width) = map.dims();
    let forward = rotate_plane(map.values(), height, width, degrees, interpolation);
    let back = rotate_plane(&forward, height, width, -degrees, interpolation);
    let mut total = 0.0;
    let mut count = 0usize;
    for row in margin..height.saturating_sub(margin) {
        for col in margin..width.saturating_sub(margin) {
            let i = row * width + col;
            total += (clamp_unit(back[i]) - map.values()[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
