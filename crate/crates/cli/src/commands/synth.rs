use std::path::PathBuf;

use anyhow::Context;
use log::info;
use uqseg_core::io::{self, format_real, ManifestRow};
use uqseg_core::synth::{cohort_image_id, generate_cohort_image, CohortConfig};

use crate::args::SynthArgs;
use crate::pipeline::{ensure_dir, map_images, with_pool};
use crate::Outcome;

pub fn run(args: &SynthArgs) -> anyhow::Result<Outcome> {
    let size = args.size as usize;
    let config = CohortConfig {
        n_images: args.n as usize,
        severity_lo: args.severity_range.0,
        severity_hi: args.severity_range.1,
        seed: args.seed,
        height: size,
        width: size,
        samples_per_image: args.samples as usize,
        ..CohortConfig::default()
    };
    config.validate()?;

    for dir in ["stacks", "reference", "gt"] {
        ensure_dir(&args.out.join(dir))?;
    }
    let images: Vec<(usize, String)> = (0..config.n_images).map(|i| (i, cohort_image_id(i))).collect();

    let (written, failed) = with_pool(args.workers, || {
        map_images(&images, |(_, id)| id.as_str(), |&(i, _)| write_image(args, &config, i))
    })?;
    anyhow::ensure!(failed == 0, "{failed} synthetic image(s) could not be written");

    let rows: Vec<ManifestRow> = written.into_iter().map(|(_, row)| row).collect();
    io::write_manifest(args.out.join("manifest.csv"), &rows)?;

    let mut severity = String::from("image_id,severity\n");
    for (i, id) in &images {
        severity.push_str(&format!("{id},{}\n", format_real(config.severity(*i))));
    }
    io::write_text(args.out.join("severity.csv"), &severity)?;
    info!("wrote {} synthetic images to {}", rows.len(), args.out.display());
    Ok(Outcome::Success)
}

fn write_image(args: &SynthArgs, config: &CohortConfig, index: usize) -> anyhow::Result<ManifestRow> {
    let image = generate_cohort_image(config, index)?;
    let id = &image.image_id;
    let row = ManifestRow {
        image_id: id.clone(),
        stack_path: PathBuf::from(format!("stacks/{id}.uqs")),
        reference_seg_path: PathBuf::from(format!("reference/{id}.uqm")),
        gt_path: Some(PathBuf::from(format!("gt/{id}.uqm"))),
    };
    let at = |p: &PathBuf| args.out.join(p);
    io::write_stack(at(&row.stack_path), &image.stack).context("writing stack")?;
    io::write_mask(at(&row.reference_seg_path), &image.reference).context("writing reference")?;
    io::write_mask(at(row.gt_path.as_ref().expect("set above")), &image.gt).context("writing ground truth")?;
    Ok(row)
}
