//! Pixel grids shared by every stage: probability maps, sample stacks,
//! binary masks and per-pixel uncertainty maps, plus the three primitives
//! everything else is built from (thresholding, binary entropy, Dice).
//!
//! All grids are row-major with `height * width > 0` pixels and store
//! values as `f64`.

use crate::error::{Error, Result};

fn check_dims(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::Empty("grid must have at least one pixel"));
    }
    if height.checked_mul(width) != Some(len) {
        return Err(Error::DimensionMismatch {
            expected: (height, width),
            found: (len / width.max(1), width),
        });
    }
    Ok(())
}

fn ensure_same_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Per-pixel probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPixel {
                    index,
                    value,
                    reason: "probability outside [0, 1]",
                });
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Builds a map from `f(row, col)`, clamping each value into `[0, 1]`.
    /// NaN becomes 0.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid must have at least one pixel");
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(clamp_unit(f(row, col)));
            }
        }
        Self {
            height,
            width,
            values,
        }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// `T >= 1` probability maps of identical dimensions for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStack {
    height: usize,
    width: usize,
    samples: Vec<ProbabilityMap>,
}

impl SampleStack {
    pub fn new(samples: Vec<ProbabilityMap>) -> Result<Self> {
        let first = samples.first().ok_or(Error::Empty("sample stack needs T >= 1"))?;
        let dims = first.dims();
        for sample in &samples[1..] {
            ensure_same_dims(dims, sample.dims())?;
        }
        Ok(Self {
            height: dims.0,
            width: dims.1,
            samples,
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
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

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn samples(&self) -> &[ProbabilityMap] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<ProbabilityMap> {
        self.samples
    }
}

/// Binary segmentation (`true` = foreground).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(height > 0 && width > 0, "grid must have at least one pixel");
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self {
            height,
            width,
            values,
        }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |_, _| false)
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

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.width + col]
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// True when every foreground pixel of `self` is also foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| !a || b)
    }
}

/// Non-negative, finite per-pixel uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl UncertaintyMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(height, width, values.len())?;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidPixel {
                    index,
                    value,
                    reason: "uncertainty must be finite and non-negative",
                });
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Constructor for values already known to satisfy the invariant.
    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            height,
            width,
            values,
        }
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl From<&ProbabilityMap> for UncertaintyMap {
    fn from(map: &ProbabilityMap) -> Self {
        Self::from_raw(map.height, map.width, map.values.clone())
    }
}

pub(crate) fn clamp_unit(value: f64) -> f64 {
    if value.is_nan() {
        0.0
    } else {
        value.clamp(0.0, 1.0)
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// Binarizes `map`: a pixel is foreground iff its value is `>= h`.
///
/// The comparison is inclusive, so `h = 0` always yields the full mask.
pub fn threshold(map: &ProbabilityMap, h: f64) -> Result<BinaryMask> {
    check_unit("threshold", h)?;
    Ok(BinaryMask {
        height: map.height,
        width: map.width,
        values: map.values.iter().map(|&v| v >= h).collect(),
    })
}

/// Natural-log binary entropy `-p ln p - (1-p) ln(1-p)`, with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_unit("probability", p)?;
    Ok(entropy_unchecked(p))
}

#[inline]
pub(crate) fn entropy_unchecked(p: f64) -> f64 {
    let q = 1.0 - p;
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if q > 0.0 {
        h -= q * q.ln();
    }
    h
}

/// Dice similarity `2|a ∩ b| / (|a| + |b|)`.
///
/// Two empty masks agree perfectly and score 1.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let mut overlap = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        overlap += usize::from(x && y);
        total += usize::from(x) + usize::from(y);
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * overlap as f64 / total as f64)
}
