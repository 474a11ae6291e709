use anyhow::Context;
use uqseg_core::io::{self, Normalization};
use uqseg_core::{build_atlas, Metric, UncertaintyMap};

use crate::args::RenderArgs;
use crate::pipeline::ensure_dir;
use crate::Outcome;

pub fn run(args: &RenderArgs) -> anyhow::Result<Outcome> {
    let metrics = args
        .metrics
        .iter()
        .map(|name| {
            let metric: Metric = name.parse()?;
            anyhow::ensure!(metric.is_pixel_metric(), "`{metric}` has no per-pixel map to render");
            Ok(metric)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let stack = io::read_stack(&args.stack).with_context(|| format!("reading {}", args.stack.display()))?;
    let stem = args
        .stack
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("stack")
        .to_string();
    ensure_dir(&args.out)?;

    for metric in metrics {
        let map = metric.pixel_map(&stack).expect("pixel metric");
        let path = args.out.join(format!("{stem}_{metric}.pgm"));
        io::write_pgm(&path, &map, args.scale.normalization(metric))?;
    }
    let atlas = UncertaintyMap::from(&build_atlas(&stack));
    io::write_pgm(args.out.join(format!("{stem}_atlas.pgm")), &atlas, Normalization::FixedRange { max: 1.0 })?;
    Ok(Outcome::Success)
}
