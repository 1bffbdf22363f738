//! Sampled-field optics: grids, spatial modes, q-plates, Fourier-plane
//! propagation and modal decomposition.

mod field;
mod grid;
mod modes;
mod qplate;

pub(crate) use field::fft2_inplace;
pub use field::{far_field, modal_overlap, JonesField, SampledField};
pub use grid::GridSpec;
pub use modes::{
    make_oam_mode, make_vector_mode, oam_spectrum, vector_mode_amplitudes, vector_mode_project,
    ModeProjector,
};
pub use qplate::{apply_qplate, QPlateParams};
