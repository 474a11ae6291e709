use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use log::info;
use uqseg_core::io;
use uqseg_core::tta::{apply_transform, assemble_stack, sample_transforms, AugmentationConfig};

use crate::args::{TtaCollectArgs, TtaEmitArgs};
use crate::pipeline::{ensure_dir, map_images, with_pool};
use crate::Outcome;

const SIDECAR_SUFFIX: &str = ".tta.jsonl";

fn augmented_name(image_id: &str, index: usize) -> String {
    format!("{image_id}_aug{index}.uqs")
}

/// Per-image seed, so an image's augmentations do not depend on its
/// position in the list.
fn image_seed(seed: u64, image_id: &str) -> u64 {
    // FNV-1a
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in image_id.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash ^ seed
}

pub fn emit(args: &TtaEmitArgs) -> anyhow::Result<Outcome> {
    if !(args.max_rotation.is_finite() && args.max_rotation >= 0.0) {
        bail!("--max-rotation must be a non-negative number of degrees");
    }
    if !(args.noise_sigma.is_finite() && args.noise_sigma >= 0.0) {
        bail!("--noise-sigma must be non-negative");
    }
    let images = io::read_image_list(&args.images).with_context(|| format!("reading {}", args.images.display()))?;
    ensure_dir(&args.out)?;

    let (done, failed) = with_pool(args.workers, || {
        map_images(&images, |(id, _)| id.as_str(), |(id, path)| emit_one(args, id, path))
    })?;
    info!("emitted {} augmentations for {} image(s)", args.samples as usize * done.len(), done.len());
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

fn emit_one(args: &TtaEmitArgs, image_id: &str, path: &Path) -> anyhow::Result<()> {
    let image = io::read_image(path).with_context(|| format!("reading {}", path.display()))?;
    let config = AugmentationConfig {
        max_rotation_deg: args.max_rotation,
        noise_sigma: args.noise_sigma * image.intensity_range(),
        ..AugmentationConfig::default()
    };
    let specs = sample_transforms(args.samples as usize, image_seed(args.seed, image_id), &config);
    for (k, spec) in specs.iter().enumerate() {
        let out = args.out.join(augmented_name(image_id, k));
        io::write_image(&out, &apply_transform(&image, spec)).with_context(|| format!("writing {}", out.display()))?;
    }
    let sidecar = args.out.join(format!("{image_id}{SIDECAR_SUFFIX}"));
    io::write_sidecar(&sidecar, &specs).with_context(|| format!("writing {}", sidecar.display()))?;
    Ok(())
}

pub fn collect(args: &TtaCollectArgs) -> anyhow::Result<Outcome> {
    let mut sidecars: Vec<(String, PathBuf)> = fs::read_dir(&args.emitted)
        .with_context(|| format!("cannot list {}", args.emitted.display()))?
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let id = name.strip_suffix(SIDECAR_SUFFIX)?.to_string();
            Some((id, path))
        })
        .collect();
    sidecars.sort();
    if sidecars.is_empty() {
        bail!("no *{SIDECAR_SUFFIX} sidecars in {}", args.emitted.display());
    }
    ensure_dir(&args.out)?;

    let (done, failed) = with_pool(args.workers, || {
        map_images(&sidecars, |(id, _)| id.as_str(), |(id, sidecar)| collect_one(args, id, sidecar))
    })?;
    info!("assembled {} stack(s) into {}", done.len(), args.out.display());
    Ok(if failed > 0 { Outcome::Partial } else { Outcome::Success })
}

fn collect_one(args: &TtaCollectArgs, image_id: &str, sidecar: &Path) -> anyhow::Result<()> {
    let records = io::read_sidecar(sidecar).with_context(|| format!("reading {}", sidecar.display()))?;
    let mut preds = Vec::with_capacity(records.len());
    for record in &records {
        let path = args.predictions.join(augmented_name(image_id, record.index));
        if !path.is_file() {
            bail!("missing prediction for augmentation {} ({})", record.index, path.display());
        }
        let pred = io::read_map(&path)
            .with_context(|| format!("augmentation {}: reading {}", record.index, path.display()))?;
        preds.push((pred, record.spec()));
    }
    let stack = assemble_stack(&preds)?;
    let out = args.out.join(format!("{image_id}.uqs"));
    io::write_stack(&out, &stack).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_id_not_position() {
        assert_eq!(image_seed(7, "a"), image_seed(7, "a"));
        assert_ne!(image_seed(7, "a"), image_seed(7, "b"));
        assert_ne!(image_seed(7, "a"), image_seed(8, "a"));
    }
}
