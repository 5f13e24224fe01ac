//! Config-driven experiments on top of `qudit-floquet`: presets, result
//! directories with checksummed manifests, and SVG figures.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod presets;
