//! Segmentation uncertainty from ensembles of prediction samples.
//!
//! Given `T` probability maps per test image (from MC dropout, checkpoint
//! ensembles or test-time augmentation), this crate computes per-pixel
//! variance, predictive entropy and mutual information, a thresholded
//! probabilistic-atlas score, collapses them to image-level scores, ranks
//! images by uncertainty and evaluates how mean Dice improves as the most
//! uncertain images are rejected.

pub mod aggregate;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod reject;
pub mod stats;
pub mod synth;
pub mod tta;

pub use aggregate::{lse_score, minmax_normalize, score_set, select_rejected, ImageScore, ImageUncertainty, ScoreInput, Selection};
pub use error::{Error, Result};
pub use grid::{binary_entropy, dsc, threshold, BinaryMask, ProbabilityMap, SampleStack, UncertaintyMap};
pub use metrics::{
    atlas_score, build_atlas, mutual_information, pixel_variance, predictive_entropy, AtlasScore, Metric,
    DEFAULT_ATLAS_THRESHOLDS,
};
pub use reject::{retention_curve, summary_table, EvalRecord, RetentionCurve, RetentionPoint, SummaryTable, DEFAULT_FRACTIONS};
pub use tta::{InputImage, TransformSpec};
