//! File formats: binary stack/mask containers, CSV tables, PGM renders and
//! augmentation sidecars. All outputs are independent of host endianness
//! and locale.

mod container;
mod pgm;
mod sidecar;
mod table;

pub use container::*;
pub use pgm::{render_pgm, write_pgm, Normalization};
pub use sidecar::{read_sidecar, write_sidecar, SidecarRecord, TRANSFORM_ORDER};
pub use table::{
    format_real, read_image_list, read_manifest, read_scores, write_curves, write_manifest, write_scores, write_text, Manifest,
    ManifestRow, CURVE_HEADER, IMAGE_LIST_HEADER, MANIFEST_HEADER, SCORES_HEADER,
};
