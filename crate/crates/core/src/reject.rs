//! Retention curves: mean Dice over the least-uncertain images as the
//! retained fraction grows, and the summary table built from them.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::aggregate::count_for_fraction;
use crate::error::{Error, Result};
use crate::io::format_real;
use crate::metrics::Metric;

/// Retained fractions reported by default.
pub const DEFAULT_FRACTIONS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

/// One evaluated image: Dice of the reference prediction against ground
/// truth, and its normalized uncertainty under each scored metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image_id: String,
    pub dsc_vs_gt: f64,
    pub uncertainty: Vec<(Metric, f64)>,
}

impl EvalRecord {
    pub fn uncertainty_for(&self, metric: Metric) -> Option<f64> {
        self.uncertainty
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|&(_, u)| u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetentionPoint {
    pub retained_fraction: f64,
    /// `None` when the curve was built from published means rather than
    /// from per-image records.
    pub n_retained: Option<usize>,
    pub mean_dsc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionCurve {
    pub label: String,
    pub points: Vec<RetentionPoint>,
}

impl RetentionCurve {
    /// Curve from precomputed `(fraction, mean_dsc)` pairs.
    pub fn from_means(label: impl Into<String>, means: &[(f64, f64)]) -> Result<Self> {
        let fractions: Vec<f64> = means.iter().map(|&(f, _)| f).collect();
        validate_fractions(&fractions)?;
        Ok(Self {
            label: label.into(),
            points: means
                .iter()
                .map(|&(retained_fraction, mean_dsc)| RetentionPoint {
                    retained_fraction,
                    n_retained: None,
                    mean_dsc,
                })
                .collect(),
        })
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.retained_fraction).collect()
    }
}

/// Fractions must be in `(0, 1]`, strictly increasing and end at 1.
pub fn validate_fractions(fractions: &[f64]) -> Result<()> {
    let last = *fractions
        .last()
        .ok_or_else(|| Error::InvalidFractions("no fractions given".into()))?;
    if let Some(&f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidFractions(format!("{f} is outside (0, 1]")));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidFractions("fractions must be strictly increasing".into()));
    }
    if last != 1.0 {
        return Err(Error::InvalidFractions("the last fraction must be 1".into()));
    }
    Ok(())
}

/// Least uncertain first. Ties are the exact reverse of the rejection
/// order (which prefers the smaller id), so retaining `f` and rejecting
/// the rest partition the set.
fn retention_order(a: &(f64, &EvalRecord), b: &(f64, &EvalRecord)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| b.1.image_id.cmp(&a.1.image_id))
}

pub fn retention_curve(records: &[EvalRecord], metric: Metric, fractions: &[f64]) -> Result<RetentionCurve> {
    if records.is_empty() {
        return Err(Error::Empty("retention curve needs at least one record"));
    }
    validate_fractions(fractions)?;

    let mut ordered = records
        .iter()
        .map(|r| {
            r.uncertainty_for(metric)
                .map(|u| (u, r))
                .ok_or_else(|| Error::MixedMetric {
                    image_id: r.image_id.clone(),
                    expected: metric.to_string(),
                    found: "no score".into(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    ordered.sort_by(retention_order);

    let total = ordered.len();
    let points = fractions
        .iter()
        .map(|&fraction| {
            let n = count_for_fraction(fraction, total);
            if n == 0 {
                return Err(Error::EmptyRetained { fraction, total });
            }
            let sum: f64 = ordered[..n].iter().map(|(_, r)| r.dsc_vs_gt).sum();
            Ok(RetentionPoint {
                retained_fraction: fraction,
                n_retained: Some(n),
                mean_dsc: sum / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RetentionCurve {
        label: metric.to_string(),
        points,
    })
}

/// Rows of mean Dice per retained fraction, one row per curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub fractions: Vec<f64>,
    pub rows: Vec<(String, Vec<f64>)>,
    pub baseline: Option<f64>,
}

pub fn summary_table(curves: &[RetentionCurve], baseline: Option<f64>) -> Result<SummaryTable> {
    let first = curves.first().ok_or(Error::Empty("summary table needs at least one curve"))?;
    let fractions = first.fractions();
    let mut rows = Vec::with_capacity(curves.len());
    for curve in curves {
        if curve.fractions() != fractions {
            return Err(Error::FractionGridMismatch {
                label: curve.label.clone(),
            });
        }
        rows.push((curve.label.clone(), curve.points.iter().map(|p| p.mean_dsc).collect()));
    }
    Ok(SummaryTable {
        fractions,
        rows,
        baseline,
    })
}

fn column_title(fraction: f64) -> String {
    if fraction == 1.0 {
        "Full (100%)".to_string()
    } else {
        format!("First {}%", format_real(fraction * 100.0))
    }
}

impl SummaryTable {
    /// `label,<fraction>...[,baseline]` followed by one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for &f in &self.fractions {
            out.push(',');
            out.push_str(&format_real(f));
        }
        if self.baseline.is_some() {
            out.push_str(",baseline");
        }
        out.push('\n');
        for (label, values) in &self.rows {
            out.push_str(label);
            for &v in values {
                out.push(',');
                out.push_str(&format_real(v));
            }
            if let Some(b) = self.baseline {
                out.push(',');
                out.push_str(&format_real(b));
            }
            out.push('\n');
        }
        out
    }

    /// Fixed-width text rendering with three decimals per cell.
    pub fn to_text(&self) -> String {
        let mut header: Vec<String> = vec!["Set".to_string()];
        header.extend(self.fractions.iter().map(|&f| column_title(f)));
        if self.baseline.is_some() {
            header.push("Baseline".to_string());
        }
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(label, values)| {
                let mut cells = vec![label.clone()];
                cells.extend(values.iter().map(|v| format!("{v:.3}")));
                if let Some(b) = self.baseline {
                    cells.push(format!("{b:.3}"));
                }
                cells
            })
            .collect();

        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }

        let mut out = String::new();
        let mut line = |cells: &[String]| {
            let mut text = String::new();
            for (i, (cell, &w)) in cells.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(text, "{cell:<w$}");
                } else {
                    let _ = write!(text, "  {cell:>w$}");
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
        };
        line(&header);
        for row in &body {
            line(row);
        }
        out
    }
}
