//! Synthetic ellipse phantoms and perturbed sample stacks.
//!
//! A single `severity` knob drives both how much the samples disagree and
//! how wrong the reference prediction is, so image-level uncertainty tracks
//! segmentation error by construction.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{clamp_unit, threshold, BinaryMask, ProbabilityMap, SampleStack};

/// Box blur radius; the blur is applied twice per axis.
pub const BLUR_RADIUS: usize = 3;

/// Standard deviation of unit white noise after two box blurs of radius
/// 3 along each axis: the 1-D kernel is a 13-tap triangle with
/// `Σ w² = 231 / 2401`, so the 2-D factor is `231 / 2401`.
const BLURRED_NOISE_STD: f64 = 231.0 / 2401.0;

/// Amplitude of the correlated noise field at severity 1.
pub const NOISE_AMPLITUDE: f64 = 0.5;

/// Amplitude of the boundary jitter term at severity 1.
pub const JITTER_AMPLITUDE: f64 = 1.0;

/// Margin the ellipse keeps from every border, in pixels.
pub const MIN_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub cx: f64,
    pub cy: f64,
    pub semi_axis_x: f64,
    pub semi_axis_y: f64,
    /// Width of the sigmoid ramp in pixels; 0 gives a hard 0/1 map.
    pub boundary_softness: f64,
    pub severity: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidPhantom("image must have at least one pixel".into()));
        }
        if !(self.semi_axis_x > 0.0 && self.semi_axis_y > 0.0) {
            return Err(Error::InvalidPhantom("semi-axes must be positive".into()));
        }
        if self.boundary_softness.is_nan() || self.boundary_softness < 0.0 {
            return Err(Error::InvalidPhantom("boundary softness must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(Error::InvalidPhantom(format!("severity {} outside [0, 1]", self.severity)));
        }
        let fits = self.cx - self.semi_axis_x >= MIN_MARGIN
            && self.cy - self.semi_axis_y >= MIN_MARGIN
            && self.cx + self.semi_axis_x <= self.width as f64 - 1.0 - MIN_MARGIN
            && self.cy + self.semi_axis_y <= self.height as f64 - 1.0 - MIN_MARGIN;
        if !fits {
            return Err(Error::InvalidPhantom(format!(
                "ellipse at ({}, {}) with semi-axes ({}, {}) does not fit {}x{} with a {MIN_MARGIN} px margin",
                self.cx, self.cy, self.semi_axis_x, self.semi_axis_y, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Implicit ellipse function and its first-order signed distance
    /// (negative inside).
    fn signed_distance(&self, row: usize, col: usize) -> (f64, f64) {
        let u = (col as f64 - self.cx) / self.semi_axis_x;
        let v = (row as f64 - self.cy) / self.semi_axis_y;
        let f = u * u + v * v - 1.0;
        let gx = 2.0 * u / self.semi_axis_x;
        let gy = 2.0 * v / self.semi_axis_y;
        let grad = (gx * gx + gy * gy).sqrt();
        let d = if grad > 0.0 { f / grad } else { f * self.semi_axis_x.min(self.semi_axis_y) };
        (f, d)
    }
}

/// Ground-truth ellipse mask and a soft probability map whose 0.5 level
/// set is the ellipse boundary.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(BinaryMask, ProbabilityMap)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let gt = BinaryMask::from_fn(h, w, |r, c| spec.signed_distance(r, c).0 <= 0.0);
    let base = ProbabilityMap::from_fn(h, w, |r, c| {
        let (f, d) = spec.signed_distance(r, c);
        if spec.boundary_softness == 0.0 {
            return if f <= 0.0 { 1.0 } else { 0.0 };
        }
        let p = 1.0 / (1.0 + (d / spec.boundary_softness).exp());
        // Keep the 0.5 level set on the boundary even when the ramp
        // rounds to exactly one half.
        if f > 0.0 && p >= 0.5 {
            0.5 - f64::EPSILON
        } else {
            p
        }
    });
    Ok((gt, base))
}

fn box_blur_rows(src: &[f64], height: usize, width: usize, radius: usize) -> Vec<f64> {
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut out = vec![0.0; src.len()];
    for r in 0..height {
        let row = &src[r * width..(r + 1) * width];
        for c in 0..width {
            let mut acc = 0.0;
            for k in 0..=2 * radius {
                let idx = (c + k).saturating_sub(radius).min(width - 1);
                acc += row[idx];
            }
            out[r * width + c] = acc * norm;
        }
    }
    out
}

fn box_blur_cols(src: &[f64], height: usize, width: usize, radius: usize) -> Vec<f64> {
    let norm = 1.0 / (2 * radius + 1) as f64;
    let mut out = vec![0.0; src.len()];
    for r in 0..height {
        for c in 0..width {
            let mut acc = 0.0;
            for k in 0..=2 * radius {
                let idx = (r + k).saturating_sub(radius).min(height - 1);
                acc += src[idx * width + c];
            }
            out[r * width + c] = acc * norm;
        }
    }
    out
}

/// White noise blurred twice per axis with a box of [`BLUR_RADIUS`] and
/// rescaled to roughly unit standard deviation.
pub fn correlated_noise(height: usize, width: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut field: Vec<f64> = (0..height * width).map(|_| StandardNormal.sample(rng)).collect();
    for _ in 0..2 {
        field = box_blur_rows(&field, height, width, BLUR_RADIUS);
        field = box_blur_cols(&field, height, width, BLUR_RADIUS);
    }
    let scale = 1.0 / BLURRED_NOISE_STD;
    field.iter_mut().for_each(|v| *v *= scale);
    field
}

/// `T` samples of `base` perturbed by a per-sample correlated noise field
/// and a per-sample boundary jitter, both scaled linearly by `severity`.
pub fn perturb_stack(base: &ProbabilityMap, sample_count: usize, severity: f64, seed: u64) -> Result<SampleStack> {
    if sample_count == 0 {
        return Err(Error::Empty("sample stack needs T >= 1"));
    }
    if !(0.0..=1.0).contains(&severity) {
        return Err(Error::Domain {
            what: "severity",
            value: severity,
        });
    }
    if severity == 0.0 {
        return SampleStack::new(vec![base.clone(); sample_count]);
    }
    let (h, w) = base.dims();
    let samples = (0..sample_count)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let shift: f64 = StandardNormal.sample(&mut rng);
            let field = correlated_noise(h, w, &mut rng);
            let values = base
                .values()
                .iter()
                .zip(&field)
                .map(|(&b, &n)| {
                    // 4b(1-b) is the slope of the sigmoid ramp, so this
                    // term moves the soft boundary in or out.
                    let jitter = JITTER_AMPLITUDE * shift * 4.0 * b * (1.0 - b);
                    clamp_unit(b + severity * (NOISE_AMPLITUDE * n + jitter))
                })
                .collect();
            ProbabilityMap::new(h, w, values)
        })
        .collect::<Result<Vec<_>>>()?;
    SampleStack::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortConfig {
    pub n_images: usize,
    pub severity_lo: f64,
    pub severity_hi: f64,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub samples_per_image: usize,
    pub boundary_softness: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_images: 200,
            severity_lo: 0.0,
            severity_hi: 0.9,
            seed: 42,
            height: 128,
            width: 128,
            samples_per_image: 10,
            boundary_softness: 1.0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images < 2 {
            return Err(Error::InvalidPhantom("a cohort needs at least 2 images".into()));
        }
        let (lo, hi) = (self.severity_lo, self.severity_hi);
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidPhantom(format!("invalid severity range ({lo}, {hi})")));
        }
        if self.samples_per_image == 0 {
            return Err(Error::Empty("sample stack needs T >= 1"));
        }
        if self.height < 16 || self.width < 16 {
            return Err(Error::InvalidPhantom("cohort images must be at least 16x16".into()));
        }
        Ok(())
    }

    /// Severity of image `index`, evenly spaced over the range.
    pub fn severity(&self, index: usize) -> f64 {
        let step = (self.severity_hi - self.severity_lo) / (self.n_images - 1) as f64;
        (self.severity_lo + step * index as f64).min(self.severity_hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortImage {
    pub image_id: String,
    pub gt: BinaryMask,
    /// Thresholded first sample; stands in for a deterministic model output.
    pub reference: BinaryMask,
    pub stack: SampleStack,
    pub severity: f64,
}

pub fn cohort_image_id(index: usize) -> String {
    format!("img{index:04}")
}

/// Generates image `index` of the cohort from its own random stream, so
/// images can be produced in any order or in parallel.
pub fn generate_cohort_image(config: &CohortConfig, index: usize) -> Result<CohortImage> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let (h, w) = (config.height as f64, config.width as f64);
    let semi_axis_x = w * rng.random_range(0.17..0.27);
    let semi_axis_y = h * rng.random_range(0.12..0.20);
    let cx = (w - 1.0) / 2.0 + w * rng.random_range(-0.06..0.06);
    let cy = (h - 1.0) / 2.0 + h * rng.random_range(-0.06..0.06);
    let severity = config.severity(index);
    let spec = PhantomSpec {
        height: config.height,
        width: config.width,
        cx,
        cy,
        semi_axis_x,
        semi_axis_y,
        boundary_softness: config.boundary_softness,
        severity,
        seed: rng.next_u64(),
    };

    let (gt, base) = generate_phantom(&spec)?;
    let stack = perturb_stack(&base, config.samples_per_image, severity, spec.seed)?;
    let reference = threshold(&stack.samples()[0], 0.5)?;
    Ok(CohortImage {
        image_id: cohort_image_id(index),
        gt,
        reference,
        stack,
        severity,
    })
}

pub fn generate_cohort(config: &CohortConfig) -> Result<Vec<CohortImage>> {
    config.validate()?;
    (0..config.n_images)
        .map(|i| generate_cohort_image(config, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dsc;
    use crate::metrics::pixel_variance;

    fn spec(softness: f64) -> PhantomSpec {
        PhantomSpec {
            height: 128,
            width: 128,
            cx: 63.5,
            cy: 63.5,
            semi_axis_x: 30.0,
            semi_axis_y: 20.0,
            boundary_softness: softness,
            severity: 0.0,
            seed: 3,
        }
    }

    fn mean(values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    #[test]
    fn blurred_noise_std_matches_kernel() {
        // Direct sum of the squared 13-tap triangle kernel.
        let kernel: Vec<f64> = (1..=7).chain((1..=6).rev()).map(|k| k as f64 / 49.0).collect();
        let sum_sq: f64 = kernel.iter().map(|k| k * k).sum();
        assert!((sum_sq - BLURRED_NOISE_STD).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let field = correlated_noise(128, 128, &mut rng);
        let m = mean(&field);
        let sd = (field.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / field.len() as f64).sqrt();
        assert!((0.7..1.3).contains(&sd), "std {sd}");
    }

    #[test]
    fn hard_boundary_matches_ground_truth() {
        let (gt, base) = generate_phantom(&spec(0.0)).unwrap();
        assert_eq!(threshold(&base, 0.5).unwrap(), gt);
        let (gt, base) = generate_phantom(&spec(1e-9)).unwrap();
        assert_eq!(threshold(&base, 0.5).unwrap(), gt);
    }

    #[test]
    fn soft_boundary_still_matches() {
        let (gt, base) = generate_phantom(&spec(1.0)).unwrap();
        assert!(dsc(&threshold(&base, 0.5).unwrap(), &gt).unwrap() >= 0.99);
    }

    #[test]
    fn phantom_is_deterministic() {
        assert_eq!(generate_phantom(&spec(1.0)).unwrap(), generate_phantom(&spec(1.0)).unwrap());
    }

    #[test]
    fn out_of_bounds_ellipse() {
        let bad = PhantomSpec { cx: 10.0, ..spec(1.0) };
        assert!(matches!(generate_phantom(&bad), Err(Error::InvalidPhantom(_))));
    }

    #[test]
    fn zero_severity_gives_copies() {
        let (_, base) = generate_phantom(&spec(1.0)).unwrap();
        let stack = perturb_stack(&base, 6, 0.0, 1).unwrap();
        assert!(pixel_variance(&stack).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variance_grows_with_severity() {
        let (_, base) = generate_phantom(&spec(1.0)).unwrap();
        let low = mean(pixel_variance(&perturb_stack(&base, 8, 0.2, 11).unwrap()).values());
        let high = mean(pixel_variance(&perturb_stack(&base, 8, 0.8, 11).unwrap()).values());
        assert!(high > low, "{high} <= {low}");
    }

    #[test]
    fn perturbation_is_deterministic() {
        let (_, base) = generate_phantom(&spec(1.0)).unwrap();
        assert_eq!(perturb_stack(&base, 4, 0.5, 9).unwrap(), perturb_stack(&base, 4, 0.5, 9).unwrap());
    }

    #[test]
    fn pristine_pair() {
        let config = CohortConfig {
            n_images: 2,
            severity_hi: 0.0,
            ..CohortConfig::default()
        };
        let cohort = generate_cohort(&config).unwrap();
        assert_eq!(cohort.len(), 2);
        for img in &cohort {
            assert!(dsc(&img.reference, &img.gt).unwrap() >= 0.99);
        }
    }

    #[test]
    fn cohort_is_deterministic_and_order_free() {
        let config = CohortConfig {
            n_images: 5,
            height: 48,
            width: 48,
            samples_per_image: 3,
            ..CohortConfig::default()
        };
        let a = generate_cohort(&config).unwrap();
        assert_eq!(a, generate_cohort(&config).unwrap());
        assert_eq!(a[3], generate_cohort_image(&config, 3).unwrap());
        let severities: Vec<f64> = a.iter().map(|c| c.severity).collect();
        assert_eq!(severities, vec![0.0, 0.225, 0.45, 0.675, 0.9]);
    }

    #[test]
    fn cohort_rejects_bad_config() {
        let one = CohortConfig {
            n_images: 1,
            ..CohortConfig::default()
        };
        assert!(generate_cohort(&one).is_err());
        let inverted = CohortConfig {
            severity_lo: 0.5,
            severity_hi: 0.2,
            ..CohortConfig::default()
        };
        assert!(generate_cohort(&inverted).is_err());
    }
}
