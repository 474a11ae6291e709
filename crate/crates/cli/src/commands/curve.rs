use anyhow::{bail, Context};
use log::warn;
use uqseg_core::io::{self, ManifestRow};
use uqseg_core::{dsc, retention_curve, summary_table, EvalRecord, ImageScore, Metric};

use crate::args::CurveArgs;
use crate::pipeline::{ensure_dir, map_images, read_manifest, score_manifest, scores_from_file, with_pool};
use crate::Outcome;

type PerMetric = Vec<(Metric, Vec<ImageScore>)>;

pub fn run(args: &CurveArgs) -> anyhow::Result<Outcome> {
    let fractions = args.checked_fractions()?;
    let metrics = args.selection.resolve()?;
    let manifest = read_manifest(&args.manifest)?;

    let (per_metric, rows, mut failed): (PerMetric, Vec<ManifestRow>, usize) = match &args.scores {
        Some(path) => {
            let per_metric = metrics
                .iter()
                .map(|&m| Ok((m, scores_from_file(path, &manifest, m)?)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            (per_metric, manifest.rows.clone(), 0)
        }
        None => {
            let scored = score_manifest(&manifest, &metrics, args.workers, None)?;
            (scored.per_metric, scored.rows, scored.failed)
        }
    };

    let with_gt: Vec<(usize, &ManifestRow)> = rows.iter().enumerate().filter(|(_, r)| r.gt_path.is_some()).collect();
    let skipped = rows.len() - with_gt.len();
    if with_gt.is_empty() {
        bail!("no ground truth available: no scored image in {} has a gt_path", args.manifest.display());
    }
    if skipped > 0 {
        warn!("{skipped} image(s) without ground truth are left out of the curves");
    }

    let (dice, dice_failed) = with_pool(args.workers, || {
        map_images(&with_gt, |(_, r)| r.image_id.as_str(), |(_, row)| reference_dice(row))
    })?;
    failed += dice_failed;
    if dice.is_empty() {
        bail!("no image with ground truth could be evaluated");
    }

    let records: Vec<EvalRecord> = dice
        .iter()
        .map(|&(k, d)| {
            let (i, row) = with_gt[k];
            EvalRecord {
                image_id: row.image_id.clone(),
                dsc_vs_gt: d,
                uncertainty: per_metric.iter().map(|(m, scores)| (*m, scores[i].normalized)).collect(),
            }
        })
        .collect();

    let curves = metrics
        .iter()
        .map(|&m| retention_curve(&records, m, &fractions))
        .collect::<uqseg_core::Result<Vec<_>>>()?;
    let table = summary_table(&curves, args.baseline)?;

    ensure_dir(&args.out)?;
    io::write_curves(args.out.join("curve.csv"), &curves)?;
    io::write_text(args.out.join("summary.csv"), &table.to_csv())?;
    let text = table.to_text();
    io::write_text(args.out.join("summary.txt"), &text)?;
    print!("{text}");

    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

fn reference_dice(row: &ManifestRow) -> anyhow::Result<f64> {
    let gt_path = row.gt_path.as_ref().expect("filtered to rows with ground truth");
    let reference = io::read_mask(&row.reference_seg_path)
        .with_context(|| format!("reading {}", row.reference_seg_path.display()))?;
    let gt = io::read_mask(gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
    Ok(dsc(&reference, &gt)?)
}
