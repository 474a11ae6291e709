//! Shared per-image work for the manifest-driven commands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use log::{error, warn};
use rayon::prelude::*;
use uqseg_core::aggregate::{lse_score, rank_scores};
use uqseg_core::io::{self, Manifest, ManifestRow};
use uqseg_core::{atlas_score, ImageScore, Metric};

use crate::args::Workers;

/// Runs `f` on a pool of `workers` threads (0 = rayon's default).
pub fn with_pool<T: Send>(workers: Workers, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.workers)
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(f))
}

/// Maps `f` over `items` in parallel, keeping input order. Failures are
/// logged against their image id and left out of the result.
pub fn map_images<T, R, F>(items: &[T], id: impl Fn(&T) -> &str + Sync, f: F) -> (Vec<(usize, R)>, usize)
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> anyhow::Result<R> + Sync,
{
    let results: Vec<anyhow::Result<R>> = items.par_iter().map(&f).collect();
    let mut ok = Vec::with_capacity(items.len());
    let mut failed = 0;
    for (i, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => ok.push((i, r)),
            Err(err) => {
                error!("image `{}`: {err:#}", id(&items[i]));
                failed += 1;
            }
        }
    }
    (ok, failed)
}

pub fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

pub fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    io::read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))
}

/// Where `--render` puts the maps of one image.
pub struct RenderTarget<'a> {
    pub dir: &'a Path,
    pub scale: crate::args::RenderScale,
}

/// Raw image-level scores of one manifest row, in `metrics` order.
pub fn raw_scores(row: &ManifestRow, metrics: &[Metric], render: Option<&RenderTarget>) -> anyhow::Result<Vec<f64>> {
    let stack = io::read_stack(&row.stack_path).with_context(|| format!("reading {}", row.stack_path.display()))?;
    let reference = if metrics.iter().any(|m| !m.is_pixel_metric()) {
        let mask = io::read_mask(&row.reference_seg_path)
            .with_context(|| format!("reading {}", row.reference_seg_path.display()))?;
        anyhow::ensure!(
            mask.dims() == stack.dims(),
            "reference is {}x{} but the stack is {}x{}",
            mask.height(),
            mask.width(),
            stack.height(),
            stack.width()
        );
        Some(mask)
    } else {
        None
    };

    metrics
        .iter()
        .map(|&metric| match metric {
            Metric::Atlas { threshold } => {
                let reference = reference.as_ref().expect("reference loaded for atlas metrics");
                Ok(atlas_score(&stack, reference, threshold)?.uncertainty)
            }
            _ => {
                let map = metric.pixel_map(&stack).expect("pixel metric");
                if let Some(target) = render {
                    let path = target.dir.join(format!("{}_{}.pgm", row.image_id, metric));
                    io::write_pgm(&path, &map, target.scale.normalization(metric))
                        .with_context(|| format!("writing {}", path.display()))?;
                }
                Ok(lse_score(&map))
            }
        })
        .collect()
}

/// Scored manifest: one ranked score list per metric, covering the images
/// that could be read.
pub struct ScoredSet {
    pub per_metric: Vec<(Metric, Vec<ImageScore>)>,
    /// Manifest rows that were scored, in manifest order.
    pub rows: Vec<ManifestRow>,
    pub failed: usize,
}

pub fn score_manifest(
    manifest: &Manifest,
    metrics: &[Metric],
    workers: Workers,
    render: Option<&RenderTarget>,
) -> anyhow::Result<ScoredSet> {
    let (ok, failed) = with_pool(workers, || {
        map_images(&manifest.rows, |r| r.image_id.as_str(), |row| raw_scores(row, metrics, render))
    })?;
    if ok.is_empty() {
        bail!("no image could be scored");
    }
    let rows: Vec<ManifestRow> = ok.iter().map(|(i, _)| manifest.rows[*i].clone()).collect();
    let per_metric = metrics
        .iter()
        .enumerate()
        .map(|(k, &metric)| {
            let raw = ok
                .iter()
                .map(|(i, scores)| (manifest.rows[*i].image_id.clone(), scores[k]))
                .collect();
            Ok((metric, rank_scores(raw, metric)?))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(ScoredSet {
        per_metric,
        rows,
        failed,
    })
}

/// Loads `metric` scores from a scores file, restricted to manifest images.
/// Every manifest image must be present.
pub fn scores_from_file(path: &Path, manifest: &Manifest, metric: Metric) -> anyhow::Result<Vec<ImageScore>> {
    let all = io::read_scores(path).with_context(|| format!("reading scores {}", path.display()))?;
    let mut out = Vec::with_capacity(manifest.rows.len());
    for row in &manifest.rows {
        let score = all
            .iter()
            .find(|s| s.image_id == row.image_id && s.metric == metric)
            .with_context(|| format!("{} has no `{metric}` score for image `{}`", path.display(), row.image_id))?;
        out.push(score.clone());
    }
    let extra = all.iter().filter(|s| s.metric == metric).count() - out.len();
    if extra > 0 {
        warn!("{extra} `{metric}` scores in {} are not in the manifest; re-ranking", path.display());
        let raw = out.into_iter().map(|s| (s.image_id, s.raw)).collect();
        return Ok(rank_scores(raw, metric)?);
    }
    Ok(out)
}
