use log::info;
use uqseg_core::io;
use uqseg_core::ImageScore;

use crate::args::MetricsArgs;
use crate::pipeline::{ensure_dir, read_manifest, score_manifest, RenderTarget};
use crate::Outcome;

pub fn run(args: &MetricsArgs) -> anyhow::Result<Outcome> {
    let metrics = args.selection.resolve()?;
    let manifest = read_manifest(&args.manifest)?;
    ensure_dir(&args.out)?;
    let maps_dir = args.out.join("maps");
    let render = if args.render {
        ensure_dir(&maps_dir)?;
        Some(RenderTarget {
            dir: &maps_dir,
            scale: args.scale,
        })
    } else {
        None
    };

    let scored = score_manifest(&manifest, &metrics, args.workers, render.as_ref())?;

    // Rows grouped by image id, metrics in selection order.
    let mut order: Vec<usize> = (0..scored.rows.len()).collect();
    order.sort_by(|&a, &b| scored.rows[a].image_id.cmp(&scored.rows[b].image_id));
    let mut rows: Vec<ImageScore> = Vec::with_capacity(scored.rows.len() * metrics.len());
    for i in order {
        for (_, scores) in &scored.per_metric {
            rows.push(scores[i].clone());
        }
    }
    let path = args.out.join("scores.csv");
    io::write_scores(&path, &rows)?;
    info!("wrote {} scores to {}", rows.len(), path.display());

    Ok(if scored.failed > 0 { Outcome::Partial } else { Outcome::Success })
}
