//! CSV schemas: manifests, image scores and retention curves.
//!
//! All files are UTF-8 with LF line endings; reals are printed with nine
//! significant digits (see [`format_real`]).

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::aggregate::ImageScore;
use crate::error::{Error, Result};
use crate::reject::RetentionCurve;

pub const MANIFEST_HEADER: [&str; 4] = ["image_id", "stack_path", "reference_seg_path", "gt_path"];
pub const SCORES_HEADER: [&str; 5] = ["image_id", "metric", "raw_score", "normalized_score", "rank"];
pub const CURVE_HEADER: [&str; 4] = ["metric", "fraction", "n_retained", "mean_dsc"];
pub const IMAGE_LIST_HEADER: [&str; 2] = ["image_id", "image_path"];

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// removed, exponent notation outside `[1e-4, 1e9)`.
pub fn format_real(value: f64) -> String {
    const DIGITS: i32 = 9;
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return if value.is_nan() { "nan".into() } else if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn expect_header(reader: &mut csv::Reader<File>, path: &Path, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::MissingHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub image_id: String,
    pub stack_path: PathBuf,
    pub reference_seg_path: PathBuf,
    pub gt_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

/// Reads a manifest. Relative paths are resolved against the manifest's
/// directory and every referenced file must exist.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv_reader(path)?;
    expect_header(&mut reader, path, &MANIFEST_HEADER)?;

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let image_id = field(0);
        if image_id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_of(&record),
                message: "empty image_id".into(),
            });
        }
        if !seen.insert(image_id.clone()) {
            return Err(Error::DuplicateId(image_id));
        }
        let resolve = |p: String| -> Result<PathBuf> {
            let full = base.join(&p);
            if p.is_empty() || !full.is_file() {
                return Err(Error::MissingFile {
                    image_id: image_id.clone(),
                    path: full,
                });
            }
            Ok(full)
        };
        let stack_path = resolve(field(1))?;
        let reference_seg_path = resolve(field(2))?;
        let gt = field(3);
        let gt_path = if gt.is_empty() { None } else { Some(resolve(gt)?) };
        rows.push(ManifestRow {
            image_id,
            stack_path,
            reference_seg_path,
            gt_path,
        });
    }
    if rows.is_empty() {
        return Err(Error::NoImages {
            path: path.to_path_buf(),
        });
    }
    Ok(Manifest { rows })
}

/// Reads an `image_id,image_path` list of test-time augmentation inputs.
/// Paths resolve like manifest paths.
pub fn read_image_list(path: impl AsRef<Path>) -> Result<Vec<(String, PathBuf)>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv_reader(path)?;
    expect_header(&mut reader, path, &IMAGE_LIST_HEADER)?;

    let mut images = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let image_id = record.get(0).unwrap_or("").to_string();
        if image_id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_of(&record),
                message: "empty image_id".into(),
            });
        }
        if !seen.insert(image_id.clone()) {
            return Err(Error::DuplicateId(image_id));
        }
        let rel = record.get(1).unwrap_or("");
        let full = base.join(rel);
        if rel.is_empty() || !full.is_file() {
            return Err(Error::MissingFile { image_id, path: full });
        }
        images.push((image_id, full));
    }
    if images.is_empty() {
        return Err(Error::NoImages {
            path: path.to_path_buf(),
        });
    }
    Ok(images)
}

/// Writes rows with their paths exactly as stored.
pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let mut writer = csv_writer(path.as_ref())?;
    writer.write_record(MANIFEST_HEADER)?;
    for row in rows {
        let gt = row.gt_path.as_deref().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default();
        writer.write_record([
            row.image_id.as_str(),
            &row.stack_path.to_string_lossy(),
            &row.reference_seg_path.to_string_lossy(),
            &gt,
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_scores(path: impl AsRef<Path>, scores: &[ImageScore]) -> Result<()> {
    let mut writer = csv_writer(path.as_ref())?;
    writer.write_record(SCORES_HEADER)?;
    for s in scores {
        writer.write_record([
            s.image_id.clone(),
            s.metric.to_string(),
            format_real(s.raw),
            format_real(s.normalized),
            s.rank.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ImageScore>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    expect_header(&mut reader, path, &SCORES_HEADER)?;
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_of(&record),
            message,
        };
        let real = |i: usize| -> Result<f64> {
            let text = record.get(i).unwrap_or("");
            text.parse().map_err(|_| parse_err(format!("invalid number `{text}`")))
        };
        let metric = record.get(1).unwrap_or("").parse()?;
        let rank_text = record.get(4).unwrap_or("");
        scores.push(ImageScore {
            image_id: record.get(0).unwrap_or("").to_string(),
            metric,
            raw: real(2)?,
            normalized: real(3)?,
            rank: rank_text
                .parse()
                .map_err(|_| parse_err(format!("invalid rank `{rank_text}`")))?,
        });
    }
    Ok(scores)
}

pub fn write_curves(path: impl AsRef<Path>, curves: &[RetentionCurve]) -> Result<()> {
    let mut writer = csv_writer(path.as_ref())?;
    writer.write_record(CURVE_HEADER)?;
    for curve in curves {
        for p in &curve.points {
            writer.write_record([
                curve.label.clone(),
                format_real(p.retained_fraction),
                p.n_retained.map(|n| n.to_string()).unwrap_or_default(),
                format_real(p.mean_dsc),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes `text` verbatim (used for the summary tables).
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}
