//! Per-pixel uncertainty from a stack of prediction samples, and the
//! thresholded-atlas image score.
//!
//! Every reduction runs pixel-major with samples summed in stack order, so
//! results are bit-stable regardless of how callers parallelize across
//! images.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{dsc, entropy_unchecked, threshold, BinaryMask, ProbabilityMap, SampleStack, UncertaintyMap};

/// Atlas thresholds reported by default (low, middle and high confidence).
pub const DEFAULT_ATLAS_THRESHOLDS: [f64; 3] = [0.1, 0.5, 0.9];

/// Negative mutual information within this distance of zero is rounding
/// noise and is clamped to zero.
pub const MI_CLAMP_TOLERANCE: f64 = 1e-12;

/// The image-level uncertainty measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Variance,
    Entropy,
    MutualInformation,
    /// Thresholded atlas compared against the reference prediction.
    Atlas { threshold: f64 },
}

impl Metric {
    /// All metrics in reporting order: the three pixel metrics followed by
    /// the atlas at each default threshold.
    pub fn all_default() -> Vec<Metric> {
        let mut metrics = vec![Metric::Variance, Metric::Entropy, Metric::MutualInformation];
        metrics.extend(DEFAULT_ATLAS_THRESHOLDS.iter().map(|&threshold| Metric::Atlas { threshold }));
        metrics
    }

    pub fn is_pixel_metric(&self) -> bool {
        !matches!(self, Metric::Atlas { .. })
    }

    /// Largest value a single pixel (or, for the atlas, the image) can take.
    pub fn theoretical_max(&self) -> f64 {
        match self {
            Metric::Variance => 0.25,
            Metric::Entropy | Metric::MutualInformation => std::f64::consts::LN_2,
            Metric::Atlas { .. } => 1.0,
        }
    }

    /// Per-pixel map for the pixel metrics; `None` for the atlas.
    pub fn pixel_map(&self, stack: &SampleStack) -> Option<UncertaintyMap> {
        match self {
            Metric::Variance => Some(pixel_variance(stack)),
            Metric::Entropy => Some(predictive_entropy(stack)),
            Metric::MutualInformation => Some(mutual_information(stack)),
            Metric::Atlas { .. } => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Variance => f.write_str("variance"),
            Metric::Entropy => f.write_str("entropy"),
            Metric::MutualInformation => f.write_str("mutual_information"),
            Metric::Atlas { threshold } => write!(f, "atlas@{threshold}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "variance" => Ok(Metric::Variance),
            "entropy" => Ok(Metric::Entropy),
            "mutual_information" | "mi" => Ok(Metric::MutualInformation),
            other => {
                let threshold = other
                    .strip_prefix("atlas@")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownMetric(other.to_string()))?;
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::Domain {
                        what: "atlas threshold",
                        value: threshold,
                    });
                }
                Ok(Metric::Atlas { threshold })
            }
        }
    }
}

/// Image-level atlas result: agreement of the thresholded atlas with the
/// reference prediction, and `1 - dsc_h` as the uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtlasScore {
    pub threshold: f64,
    pub dsc_h: f64,
    pub uncertainty: f64,
}

/// Per-pixel mean of `f(sample value)`, accumulated as deviations from the
/// first sample so that agreeing samples reproduce their value exactly.
fn per_pixel_mean_of(stack: &SampleStack, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let t = stack.sample_count() as f64;
    let (first, rest) = stack.samples().split_first().expect("stack has T >= 1");
    let anchor: Vec<f64> = first.values().iter().map(|&v| f(v)).collect();
    let mut deviation = vec![0.0; anchor.len()];
    for sample in rest {
        for ((acc, &v), &a) in deviation.iter_mut().zip(sample.values()).zip(&anchor) {
            *acc += f(v) - a;
        }
    }
    anchor.iter().zip(deviation).map(|(&a, d)| a + d / t).collect()
}

fn per_pixel_mean(stack: &SampleStack) -> Vec<f64> {
    per_pixel_mean_of(stack, |v| v)
        .into_iter()
        .map(|m| m.clamp(0.0, 1.0))
        .collect()
}

/// Per-pixel arithmetic mean of the samples.
pub fn build_atlas(stack: &SampleStack) -> ProbabilityMap {
    let (height, width) = stack.dims();
    let values = per_pixel_mean(stack);
    ProbabilityMap::new(height, width, values).expect("mean of probabilities is a probability")
}

/// Per-pixel population variance (divisor `T`).
pub fn pixel_variance(stack: &SampleStack) -> UncertaintyMap {
    let (height, width) = stack.dims();
    let t = stack.sample_count() as f64;
    let mean = per_pixel_mean(stack);
    let mut acc = vec![0.0; mean.len()];
    for sample in stack.samples() {
        for ((a, &v), &m) in acc.iter_mut().zip(sample.values()).zip(&mean) {
            let d = v - m;
            *a += d * d;
        }
    }
    let values = acc.into_iter().map(|s| s / t).collect();
    UncertaintyMap::from_raw(height, width, values)
}

/// Binary entropy of the per-pixel mean prediction.
pub fn predictive_entropy(stack: &SampleStack) -> UncertaintyMap {
    let (height, width) = stack.dims();
    let values = per_pixel_mean(stack).into_iter().map(entropy_unchecked).collect();
    UncertaintyMap::from_raw(height, width, values)
}

/// Entropy of the mean minus the mean of per-sample entropies, before any
/// clamping. Non-negative up to rounding by concavity of the entropy.
pub fn mutual_information_unclamped(stack: &SampleStack) -> Vec<f64> {
    let mean = per_pixel_mean(stack);
    let expected = per_pixel_mean_of(stack, entropy_unchecked);
    mean.iter()
        .zip(expected)
        .map(|(&m, e)| entropy_unchecked(m) - e)
        .collect()
}

/// Per-pixel mutual information between prediction and sample index.
pub fn mutual_information(stack: &SampleStack) -> UncertaintyMap {
    let (height, width) = stack.dims();
    let values = mutual_information_unclamped(stack)
        .into_iter()
        .map(|mi| {
            debug_assert!(mi >= -MI_CLAMP_TOLERANCE, "mutual information {mi} below tolerance");
            mi.max(0.0)
        })
        .collect();
    UncertaintyMap::from_raw(height, width, values)
}

/// Thresholds the atlas at `h` and scores it against `reference`.
pub fn atlas_score(stack: &SampleStack, reference: &BinaryMask, h: f64) -> Result<AtlasScore> {
    if reference.dims() != stack.dims() {
        return Err(Error::DimensionMismatch {
            expected: stack.dims(),
            found: reference.dims(),
        });
    }
    let thresholded = threshold(&build_atlas(stack), h)?;
    let dsc_h = dsc(&thresholded, reference)?;
    Ok(AtlasScore {
        threshold: h,
        dsc_h,
        uncertainty: 1.0 - dsc_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    /// One-pixel stack with the given per-sample values.
    fn pixel_stack(values: &[f64]) -> SampleStack {
        SampleStack::new(
            values
                .iter()
                .map(|&v| ProbabilityMap::new(1, 1, vec![v]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn stack_from(t: usize, h: usize, w: usize, values: &[f64]) -> SampleStack {
        SampleStack::new(
            values
                .chunks(h * w)
                .take(t)
                .map(|c| ProbabilityMap::new(h, w, c.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn variance_examples() {
        let same = pixel_stack(&[0.3, 0.3, 0.3]);
        assert_eq!(pixel_variance(&same).values(), &[0.0]);
        assert_eq!(pixel_variance(&pixel_stack(&[0.0, 1.0])).values(), &[0.25]);
        let v = pixel_variance(&pixel_stack(&[0.2, 0.4, 0.6])).values()[0];
        assert!((v - 2.0 / 75.0).abs() < 1e-15);
    }

    #[test]
    fn atlas_examples() {
        let m = ProbabilityMap::new(1, 3, vec![0.1, 0.7, 1.0]).unwrap();
        let stack = SampleStack::new(vec![m.clone(), m.clone(), m.clone()]).unwrap();
        assert_eq!(build_atlas(&stack), m);
        assert_eq!(build_atlas(&pixel_stack(&[0.0, 1.0])).values(), &[0.5]);
        let a = build_atlas(&pixel_stack(&[0.2, 0.4, 0.6])).values()[0];
        assert!((a - 0.4).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(predictive_entropy(&pixel_stack(&[0.0, 0.0])).values(), &[0.0]);
        assert!((predictive_entropy(&pixel_stack(&[0.0, 1.0])).values()[0] - LN_2).abs() < 1e-15);
        // mpmath: H(0.4) = 0.67301166700925643600...
        let h = predictive_entropy(&pixel_stack(&[0.2, 0.4, 0.6])).values()[0];
        assert!((h - 0.673_011_667_009_256_4).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        assert_eq!(mutual_information(&pixel_stack(&[0.37, 0.37])).values(), &[0.0]);
        assert!((mutual_information(&pixel_stack(&[0.0, 1.0])).values()[0] - LN_2).abs() < 1e-15);
        // mpmath: H(0.4) - (H(0.2) + H(0.6)) / 2 = 0.08630462173553427823...
        let mi = mutual_information(&pixel_stack(&[0.2, 0.6])).values()[0];
        assert!((mi - 0.086_304_621_735_534_28).abs() < 1e-12);
    }

    #[test]
    fn atlas_score_perfect_copies() {
        let reference = BinaryMask::from_fn(4, 4, |r, c| r >= 1 && c >= 1 && r < 3);
        let map = ProbabilityMap::from_fn(4, 4, |r, c| if reference.get(r, c) { 1.0 } else { 0.0 });
        let stack = SampleStack::new(vec![map; 5]).unwrap();
        for h in DEFAULT_ATLAS_THRESHOLDS {
            let score = atlas_score(&stack, &reference, h).unwrap();
            assert_eq!(score.dsc_h, 1.0);
            assert_eq!(score.uncertainty, 0.0);
        }
    }

    #[test]
    fn atlas_score_uniform_half_at_high_threshold() {
        let stack = SampleStack::new(vec![ProbabilityMap::filled(3, 3, 0.5).unwrap(); 2]).unwrap();
        let reference = BinaryMask::from_fn(3, 3, |r, _| r == 1);
        let score = atlas_score(&stack, &reference, 0.9).unwrap();
        assert_eq!(score.dsc_h, 0.0);
        assert_eq!(score.uncertainty, 1.0);
    }

    #[test]
    fn atlas_score_brute_force_4x4() {
        // Two samples agree on a 2x2 core and disagree on two border pixels.
        let core = |r: usize, c: usize| (1..3).contains(&r) && (1..3).contains(&c);
        let a = ProbabilityMap::from_fn(4, 4, |r, c| if core(r, c) || (r, c) == (0, 1) { 0.9 } else { 0.05 });
        let b = ProbabilityMap::from_fn(4, 4, |r, c| if core(r, c) || (r, c) == (3, 2) { 0.8 } else { 0.1 });
        let stack = SampleStack::new(vec![a.clone(), b.clone()]).unwrap();
        let reference = BinaryMask::from_fn(4, 4, core);

        let mut inter = 0usize;
        let mut total = 0usize;
        for i in 0..16 {
            let mean = (a.values()[i] + b.values()[i]) / 2.0;
            let fg = mean >= 0.5;
            let rf = reference.values()[i];
            inter += usize::from(fg && rf);
            total += usize::from(fg) + usize::from(rf);
        }
        let expected = 2.0 * inter as f64 / total as f64;

        let score = atlas_score(&stack, &reference, 0.5).unwrap();
        assert_eq!(score.dsc_h, expected);
        assert_eq!(score.uncertainty, 1.0 - expected);
    }

    #[test]
    fn atlas_score_dimension_mismatch() {
        let stack = pixel_stack(&[0.5]);
        let reference = BinaryMask::empty(2, 2);
        assert!(matches!(atlas_score(&stack, &reference, 0.5), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn metric_names_round_trip() {
        for metric in Metric::all_default() {
            assert_eq!(metric.to_string().parse::<Metric>().unwrap(), metric);
        }
        assert_eq!(Metric::all_default()[3].to_string(), "atlas@0.1");
        assert!("atlas@1.5".parse::<Metric>().is_err());
        assert!("kurtosis".parse::<Metric>().is_err());
    }

    fn stacks() -> impl Strategy<Value = SampleStack> {
        (1usize..=5, 1usize..=5, 1usize..=5).prop_flat_map(|(t, h, w)| {
            proptest::collection::vec(0.0f64..=1.0, t * h * w).prop_map(move |v| stack_from(t, h, w, &v))
        })
    }

    proptest! {
        #[test]
        fn bounds_hold(stack in stacks()) {
            let var = pixel_variance(&stack);
            let ent = predictive_entropy(&stack);
            let mi = mutual_information(&stack);
            for i in 0..stack.pixel_count() {
                prop_assert!(var.values()[i] <= 0.25 + 1e-15);
                prop_assert!(mi.values()[i] <= ent.values()[i] + 1e-9);
                prop_assert!(ent.values()[i] <= LN_2 + 1e-15);
            }
        }

        #[test]
        fn entropy_is_entropy_of_atlas(stack in stacks()) {
            let atlas = build_atlas(&stack);
            let ent = predictive_entropy(&stack);
            for (&p, &h) in atlas.values().iter().zip(ent.values()) {
                prop_assert_eq!(crate::grid::binary_entropy(p).unwrap(), h);
            }
        }

        #[test]
        fn sample_order_does_not_matter(stack in stacks()) {
            let mut reversed = stack.samples().to_vec();
            reversed.reverse();
            let reversed = SampleStack::new(reversed).unwrap();
            let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
            prop_assert!(close(pixel_variance(&stack).values(), pixel_variance(&reversed).values()));
            prop_assert!(close(predictive_entropy(&stack).values(), predictive_entropy(&reversed).values()));
            prop_assert!(close(mutual_information(&stack).values(), mutual_information(&reversed).values()));
            prop_assert!(close(build_atlas(&stack).values(), build_atlas(&reversed).values()));
        }

        #[test]
        fn atlas_masks_nest_in_threshold(stack in stacks(), h1 in 0.0f64..=1.0, h2 in 0.0f64..=1.0) {
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            let atlas = build_atlas(&stack);
            prop_assert!(threshold(&atlas, hi).unwrap().is_subset_of(&threshold(&atlas, lo).unwrap()));
        }
    }
}
