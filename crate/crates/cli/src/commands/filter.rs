use anyhow::Context;
use uqseg_core::io::{self, ManifestRow};
use uqseg_core::{select_rejected, Metric};

use crate::args::FilterArgs;
use crate::pipeline::{ensure_dir, read_manifest, score_manifest, scores_from_file};
use crate::Outcome;

pub fn run(args: &FilterArgs) -> anyhow::Result<Outcome> {
    let metric: Metric = args.metric.parse()?;
    let manifest = read_manifest(&args.manifest)?;

    let (scores, rows, failed) = match &args.scores {
        Some(path) => (scores_from_file(path, &manifest, metric)?, manifest.rows.clone(), 0),
        None => {
            let mut scored = score_manifest(&manifest, &[metric], args.workers, None)?;
            let (_, scores) = scored.per_metric.remove(0);
            (scores, scored.rows, scored.failed)
        }
    };

    let selection = select_rejected(&scores, args.fraction)?;
    // Written sorted by image id; ranks are in scores.csv.
    let by_id = |ids: &[String]| -> anyhow::Result<Vec<ManifestRow>> {
        let mut ids = ids.to_vec();
        ids.sort();
        ids.iter()
            .map(|id| {
                rows.iter()
                    .find(|r| &r.image_id == id)
                    .cloned()
                    .with_context(|| format!("image `{id}` is not in the manifest"))
            })
            .collect()
    };
    let base = args.manifest.parent().unwrap_or(std::path::Path::new(""));
    let relative = |mut rows: Vec<ManifestRow>| {
        for row in &mut rows {
            row.stack_path = relative_to(&row.stack_path, base, &args.out);
            row.reference_seg_path = relative_to(&row.reference_seg_path, base, &args.out);
            row.gt_path = row.gt_path.as_ref().map(|p| relative_to(p, base, &args.out));
        }
        rows
    };

    ensure_dir(&args.out)?;
    io::write_manifest(args.out.join("retained.csv"), &relative(by_id(&selection.retained)?))?;
    io::write_manifest(args.out.join("rejected.csv"), &relative(by_id(&selection.rejected)?))?;
    println!(
        "rejected {} of {} images by {metric} (fraction {}); retained {}",
        selection.rejected.len(),
        scores.len(),
        args.fraction,
        selection.retained.len()
    );

    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

/// Re-expresses a path that was resolved against `base` so the written
/// manifest works from `out_dir`. Falls back to an absolute path.
fn relative_to(path: &std::path::Path, base: &std::path::Path, out_dir: &std::path::Path) -> std::path::PathBuf {
    if base == out_dir {
        if let Ok(stripped) = path.strip_prefix(base) {
            return stripped.to_path_buf();
        }
    }
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
