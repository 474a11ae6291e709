//! Image-level scoring: pixel maps are collapsed with log-sum-exp, scores
//! are min-max normalized across the test set, and images are ranked so
//! that rank 1 is the most uncertain.
//!
//! Scoring is two-phase. [`lse_score`] is pure and can run per image in
//! parallel; [`rank_scores`] is a single serial pass over the collected raw
//! values.

use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::UncertaintyMap;
use crate::metrics::{AtlasScore, Metric};

/// `ln Σ exp(u_i)` over all pixels, stabilized by shifting with the maximum.
pub fn lse_score(umap: &UncertaintyMap) -> f64 {
    log_sum_exp(umap.values())
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&u| (u - max).exp()).sum();
    max + sum.ln()
}

/// `(s - min) / (max - min)`; a degenerate range maps every score to 0.
pub fn minmax_normalize(raw: &[f64]) -> Vec<f64> {
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    if !span.is_finite() || span <= 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|&s| ((s - min) / span).clamp(0.0, 1.0)).collect()
}

/// What one image contributes to a scored set.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageUncertainty {
    Map(UncertaintyMap),
    Atlas(AtlasScore),
}

impl ImageUncertainty {
    fn kind(&self) -> String {
        match self {
            ImageUncertainty::Map(_) => "pixel map".to_string(),
            ImageUncertainty::Atlas(score) => format!("atlas@{}", score.threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInput {
    pub image_id: String,
    pub uncertainty: ImageUncertainty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageScore {
    pub image_id: String,
    pub metric: Metric,
    pub raw: f64,
    pub normalized: f64,
    /// 1 = most uncertain.
    pub rank: usize,
}

/// Raw image-level score for one record under `metric`.
pub fn raw_score(image_id: &str, uncertainty: &ImageUncertainty, metric: Metric) -> Result<f64> {
    match (metric, uncertainty) {
        (Metric::Atlas { threshold }, ImageUncertainty::Atlas(score)) if score.threshold == threshold => {
            Ok(score.uncertainty)
        }
        (m, ImageUncertainty::Map(map)) if m.is_pixel_metric() => Ok(lse_score(map)),
        (m, other) => Err(Error::MixedMetric {
            image_id: image_id.to_string(),
            expected: m.to_string(),
            found: other.kind(),
        }),
    }
}

/// Scores a test set under one metric. Output order follows input order.
pub fn score_set(records: &[ScoreInput], metric: Metric) -> Result<Vec<ImageScore>> {
    let raw = records
        .iter()
        .map(|r| Ok((r.image_id.clone(), raw_score(&r.image_id, &r.uncertainty, metric)?)))
        .collect::<Result<Vec<_>>>()?;
    rank_scores(raw, metric)
}

/// Orders by descending raw score, ties by ascending image id.
fn uncertainty_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Normalizes and ranks precomputed raw scores. Output order follows input
/// order.
pub fn rank_scores(raw: Vec<(String, f64)>, metric: Metric) -> Result<Vec<ImageScore>> {
    if raw.is_empty() {
        return Err(Error::Empty("score set needs at least one image"));
    }
    let mut seen = HashSet::with_capacity(raw.len());
    for (id, _) in &raw {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }

    let values: Vec<f64> = raw.iter().map(|(_, s)| *s).collect();
    let normalized = minmax_normalize(&values);

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| uncertainty_order((&raw[i].0, raw[i].1), (&raw[j].0, raw[j].1)));
    let mut ranks = vec![0; raw.len()];
    for (position, &i) in order.iter().enumerate() {
        ranks[i] = position + 1;
    }

    Ok(raw
        .into_iter()
        .zip(normalized)
        .zip(ranks)
        .map(|(((image_id, raw), normalized), rank)| ImageScore {
            image_id,
            metric,
            raw,
            normalized,
            rank,
        })
        .collect())
}

/// Number of images covered by `fraction` of `total`, rounding half up.
pub fn count_for_fraction(fraction: f64, total: usize) -> usize {
    ((fraction * total as f64 + 0.5).floor() as usize).min(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    /// Most uncertain first.
    pub rejected: Vec<String>,
    /// Remaining images in rank order.
    pub retained: Vec<String>,
}

/// Rejects the `round(fraction * N)` highest-ranked images.
pub fn select_rejected(scores: &[ImageScore], reject_fraction: f64) -> Result<Selection> {
    if !(0.0..=1.0).contains(&reject_fraction) {
        return Err(Error::Domain {
            what: "reject fraction",
            value: reject_fraction,
        });
    }
    let mut ordered: Vec<&ImageScore> = scores.iter().collect();
    ordered.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.image_id.cmp(&b.image_id)));
    let n_reject = count_for_fraction(reject_fraction, ordered.len());
    let (rejected, retained) = ordered.split_at(n_reject);
    Ok(Selection {
        rejected: rejected.iter().map(|s| s.image_id.clone()).collect(),
        retained: retained.iter().map(|s| s.image_id.clone()).collect(),
    })
}
