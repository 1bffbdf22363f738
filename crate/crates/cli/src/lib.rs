//! Reproducible experiment runner for the vortex-channel simulation library:
//! parameter sweeps, screen calibration, tomography demos and the image-link
//! simulation, all emitting CSV tables and SVG figures.

pub mod config;
pub mod experiments;
pub mod plot;
