pub mod curve;
pub mod filter;
pub mod metrics;
pub mod render;
pub mod synth;
pub mod tta;
